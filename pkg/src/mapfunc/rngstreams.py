"""Counter-based splittable random streams.

Every sampler in the package draws from a stream identified by
``(master_seed, stream_index)``.  Streams are backed by the Philox
counter-based bit generator keyed directly with that pair, so

* stream ``k`` is reproducible in isolation (no sequential state shared
  between streams), and
* workers can own disjoint stream-index ranges and produce bit-identical
  results regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Draws are chunked so results do not depend on the worker count: chunk i of
# a batched operation always uses stream base+i regardless of threads.
STREAM_CHUNK = 16384

# Commands/operations space their stream bases this far apart so that one
# run never reuses a stream index across operations.
STREAM_SPAN = 1 << 20


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Generator for stream ``index`` derived from ``master_seed``."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    key = np.array([master_seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def n_chunks(n: int, chunk: int = STREAM_CHUNK) -> int:
    return (n + chunk - 1) // chunk


def chunk_sizes(n: int, chunk: int = STREAM_CHUNK) -> list[int]:
    """Sizes of the per-stream chunks that partition ``n`` draws."""
    full, rem = divmod(n, chunk)
    sizes = [chunk] * full
    if rem:
        sizes.append(rem)
    return sizes
