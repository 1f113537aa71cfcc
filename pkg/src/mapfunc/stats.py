"""Shared estimation utilities.

Tagged sample collections plus the estimators used throughout: empirical
survival, log-log tail slope, Hill index, a two-sample KS test with the
asymptotic p-value series, and a percentile bootstrap on derived streams.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptySample, KOutOfRange, TooFewExceedances
from .rngstreams import stream

__all__ = [
    "SampleSet",
    "empirical_survival",
    "loglog_tail_slope",
    "hill_estimator",
    "ks_two_sample",
    "bootstrap_ci",
]

KS_MIN_N = 50  # below this the asymptotic p-value is noise; refuse
HILL_MIN_K = 10
BOOTSTRAP_MIN_REPLICATES = 100

# Stream indices used by the bootstrap are offset so they never collide
# with sampling streams run under the same master seed.
_BOOTSTRAP_STREAM_OFFSET = 1 << 48

MAGIC = b"MFS1"


@dataclass
class SampleSet:
    """Tagged collection of i.i.d. scalar draws.

    Values must be finite.  A sorted view is cached after the first
    order-statistics query; the array itself is treated as immutable.
    """

    values: np.ndarray
    label: str = ""
    model_hash: str = ""
    master_seed: int = 0
    _sorted: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if self.values.size and not np.isfinite(self.values).all():
            raise ValueError("values must be finite")

    @property
    def count(self) -> int:
        return int(self.values.size)

    def sorted_values(self) -> np.ndarray:
        if self._sorted is None:
            self._sorted = np.sort(self.values)
        return self._sorted

    def quantile(self, q) -> np.ndarray:
        s = self.sorted_values()
        if s.size == 0:
            raise EmptySample("quantile of an empty sample")
        idx = np.clip((np.asarray(q, dtype=float) * s.size).astype(int), 0, s.size - 1)
        return s[idx]

    # -- persistence --------------------------------------------------------

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(
                f"# label={self.label} model={self.model_hash} "
                f"seed={self.master_seed} count={self.count}\n"
            )
            for v in self.values:
                fh.write(f"{float(v)!r}\n")

    @classmethod
    def load_csv(cls, path) -> "SampleSet":
        label, model_hash, seed = "", "", 0
        values = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    for tok in line[1:].split():
                        key, _, val = tok.partition("=")
                        if key == "label":
                            label = val
                        elif key == "model":
                            model_hash = val
                        elif key == "seed":
                            seed = int(val)
                    continue
                values.append(float(line))
        return cls(np.array(values), label=label, model_hash=model_hash, master_seed=seed)

    def save_binary(self, path) -> None:
        """Magic 'MFS1' + little-endian float64 array, JSON sidecar '<path>.json'."""
        arr = np.ascontiguousarray(self.values, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", arr.size))
            fh.write(arr.tobytes())
        meta = {
            "label": self.label,
            "model": self.model_hash,
            "seed": self.master_seed,
            "count": self.count,
            "dtype": "<f8",
        }
        with open(str(path) + ".json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load_binary(cls, path) -> "SampleSet":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
            (n,) = struct.unpack("<Q", fh.read(8))
            arr = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        try:
            with open(str(path) + ".json", "r", encoding="utf-8") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            meta = {}
        return cls(
            arr,
            label=meta.get("label", ""),
            model_hash=meta.get("model", ""),
            master_seed=int(meta.get("seed", 0)),
        )


def _as_array(s) -> np.ndarray:
    if isinstance(s, SampleSet):
        return s.values
    return np.asarray(s, dtype=float)


def empirical_survival(s, x: float) -> float:
    """Fraction of values strictly greater than x."""
    values = _as_array(s)
    if values.size == 0:
        raise EmptySample("empirical survival of an empty sample")
    if isinstance(s, SampleSet):
        srt = s.sorted_values()
        return float(srt.size - np.searchsorted(srt, x, side="right")) / srt.size
    return float(np.mean(values > x))


def survival_at(s, xs) -> np.ndarray:
    """Vectorized empirical survival at each grid point."""
    values = _as_array(s)
    if values.size == 0:
        raise EmptySample("empirical survival of an empty sample")
    srt = s.sorted_values() if isinstance(s, SampleSet) else np.sort(values)
    xs = np.asarray(xs, dtype=float)
    return (srt.size - np.searchsorted(srt, xs, side="right")) / srt.size


def loglog_tail_slope(s, survival_window=(1e-2, 1e-4), points: int = 40):
    """Least-squares slope of log survival vs log threshold over a window.

    The window is a pair of survival levels (shallow, deep); thresholds are
    log-spaced between the corresponding sample quantiles.  Requires at
    least 100 exceedances beyond the deep end.
    """
    values = _as_array(s)
    hi, lo = max(survival_window), min(survival_window)
    n = values.size
    if n * lo < 100:
        raise TooFewExceedances(
            f"window depth {lo:g} needs >= {math.ceil(100 / lo)} samples, have {n}"
        )
    srt = np.sort(values)
    t_lo = srt[int(n * (1 - hi))]
    t_hi = srt[int(n * (1 - lo))]
    if not (t_lo > 0 and t_hi > t_lo):
        raise TooFewExceedances("window thresholds must be positive and increasing")
    ts = np.geomspace(t_lo, t_hi, points)
    surv = (n - np.searchsorted(srt, ts, side="right")) / n
    keep = surv > 0
    ts, surv = ts[keep], surv[keep]
    x = np.log(ts)
    y = np.log(surv)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    sx = x - x.mean()
    stderr = math.sqrt(float(resid @ resid) / dof / float(sx @ sx))
    return float(slope), float(stderr)


def hill_estimator(s, k: int):
    """Hill tail-index estimate over the top-k order statistics.

    Returns (index, stderr) with stderr = index / sqrt(k).
    """
    values = _as_array(s)
    n = values.size
    if k < HILL_MIN_K or k >= n / 2:
        raise KOutOfRange(f"k must satisfy {HILL_MIN_K} <= k < n/2 = {n / 2:g}")
    srt = np.sort(values)
    top = srt[n - k:]
    floor = srt[n - k - 1]
    if floor <= 0:
        raise KOutOfRange("order statistics must be positive over the tail")
    mean_log = float(np.mean(np.log(top / floor)))
    index = 1.0 / mean_log
    return index, index / math.sqrt(k)


def _kolmogorov_sf(t: float, max_terms: int = 100, eps: float = 1e-10) -> float:
    """Survival function of the Kolmogorov statistic (alternating series)."""
    if t < 1e-8:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, max_terms + 1):
        term = math.exp(-2.0 * k * k * t * t)
        total += sign * term
        if term <= eps:
            break
        sign = -sign
    return max(0.0, min(1.0, 2.0 * total))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    xa = np.sort(_as_array(a))
    xb = np.sort(_as_array(b))
    if xa.size == 0 or xb.size == 0:
        raise EmptySample("KS test needs two nonempty samples")
    if xa.size < KS_MIN_N or xb.size < KS_MIN_N:
        raise EmptySample(f"KS test needs at least {KS_MIN_N} points per sample")
    everything = np.concatenate([xa, xb])
    cdf_a = np.searchsorted(xa, everything, side="right") / xa.size
    cdf_b = np.searchsorted(xb, everything, side="right") / xb.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(xa.size * xb.size / (xa.size + xb.size))
    p = _kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
    return d, p


def bootstrap_ci(
    estimator: Callable[[np.ndarray], float],
    s: SampleSet,
    replicates: int = 200,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap interval; deterministic given the sample's seed."""
    if replicates < BOOTSTRAP_MIN_REPLICATES:
        raise ValueError(f"need at least {BOOTSTRAP_MIN_REPLICATES} replicates")
    values = s.values
    if values.size == 0:
        raise EmptySample("bootstrap of an empty sample")
    stats = np.empty(replicates)
    for r in range(replicates):
        rng = stream(s.master_seed, _BOOTSTRAP_STREAM_OFFSET + r)
        idx = rng.integers(0, values.size, values.size)
        stats[r] = estimator(values[idx])
    lo = (1.0 - level) / 2.0
    return (
        float(np.quantile(stats, lo)),
        float(np.quantile(stats, 1.0 - lo)),
    )
