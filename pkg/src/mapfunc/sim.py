"""Path simulation and Monte Carlo sampling of the exponential functionals.

Construction: the chain alternates regimes on exponential clocks; within a
regime the log level follows that regime's jump diffusion, and a switch
jump is applied at each regime change.  The standard functional
integrates exp(log level) over all time; the signed functional weights
the integrand by the current state's sign.

Sampling strategy: one full switching cycle returns the process to its
start state, so the functionals satisfy the perpetuity recursion
``total = cycle_integral + cycle_weight * fresh_total`` with the weight
``exp(cycle log increment)``.  The samplers accumulate cycle blocks until
the running weight is negligible relative to the partial sum, and flag
divergence heuristically (cycle cap / magnitude threshold); the
finiteness classifier, not the sampler, is authoritative about
convergence.

Everything is vectorized across draws.  Draws within one batch advance
through segments in lockstep (they all alternate through the same regime
sequence), which keeps the per-segment work a handful of numpy
operations; Brownian trapezoid integration runs in a compiled kernel.
Reproducibility: all randomness comes from counter-based streams keyed by
``(cfg.master_seed, stream_index)``, draws are chunked by fixed-size
stream blocks, and cycle sums use compensated accumulation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._kernels import brownian_pieces
from .errors import KillingUnsupported, NotConvergent
from .model import JumpLaw, LevyLaw, MapModel, MINUS, PLUS, other_state
from .rngstreams import STREAM_CHUNK, chunk_sizes, stream
from .stats import SampleSet, ks_two_sample

__all__ = [
    "SimConfig",
    "CyclePack",
    "PathRecord",
    "DIVERGED",
    "sample_segment",
    "sample_cycle",
    "sample_cycles",
    "sample_A_inf",
    "sample_B_inf",
    "sample_AB_batch",
    "sample_xi_T2",
    "affine_fixedpoint_check",
    "sample_path",
    "exp_integral",
]


class _Diverged:
    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "Diverged"


DIVERGED = _Diverged()


@dataclass(frozen=True)
class SimConfig:
    """Knobs shared by all samplers.

    grid_step bounds the trapezoid step for Brownian integration (bias is
    second order in it).  trunc_weight is the relative weight at which the
    perpetuity recursion is truncated; relative rather than absolute so
    heavy-tailed draws with huge partial sums still terminate correctly.
    max_cycles / diverge_threshold are the divergence heuristics.
    """

    master_seed: int = 0
    grid_step: float = 1e-3
    trunc_weight: float = 1e-12
    max_cycles: int = 100_000
    diverge_threshold: float = 1e12

    def __post_init__(self):
        if not (
            self.grid_step > 0
            and self.trunc_weight > 0
            and self.max_cycles > 0
            and self.diverge_threshold > 0
        ):
            raise ValueError("all SimConfig parameters must be positive")


@dataclass(frozen=True)
class CyclePack:
    """Sufficient statistics of one full switching cycle."""

    t2: float
    xi_t2: float
    y_t2: float
    a_t2: float
    b_t2: float


@dataclass
class PathRecord:
    """Node-level record of one path for diagnostics.

    ``times``/``xi`` hold piecewise nodes with duplicated time entries at
    jumps (pre value then post value).  ``breakpoints`` are the switch
    times inside the horizon; ``states`` has one entry per inter-switch
    interval, alternating from the start state.
    """

    horizon: float
    breakpoints: np.ndarray
    states: list[str]
    times: np.ndarray
    xi: np.ndarray
    marks: list[tuple[float, float, str]]
    lifetime: float | None = None


# ---------------------------------------------------------------------------
# Segment machinery
# ---------------------------------------------------------------------------


def _coerce_rng(cfg: SimConfig, rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(cfg.master_seed, int(rng))


def _build_pieces(levy: LevyLaw, durs: np.ndarray, rng: np.random.Generator):
    """Split each duration at its compound-Poisson epochs.

    Returns (draw_ofs, piece_dur, jump_after); pieces of a draw are
    contiguous and in time order, the trailing piece carries jump 0.
    """
    n = durs.size
    if levy.cpp_rate <= 0:
        draw_ofs = np.arange(n + 1, dtype=np.int64)
        return draw_ofs, durs.astype(float), np.zeros(n)
    counts = rng.poisson(levy.cpp_rate * durs)
    total = int(counts.sum())
    draw_id = np.repeat(np.arange(n), counts)
    u = rng.random(total) * durs[draw_id]
    order = np.lexsort((u, draw_id))
    epochs = u[order]
    sizes = levy.cpp_jump.sample(rng, total)

    pieces = counts + 1
    draw_ofs = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(pieces, out=draw_ofs[1:])
    n_pieces = total + n

    last_pos = draw_ofs[1:] - 1
    inner = np.ones(n_pieces, dtype=bool)
    inner[last_pos] = False

    ends = np.empty(n_pieces)
    ends[inner] = epochs
    ends[last_pos] = durs
    starts = np.empty(n_pieces)
    first_pos = draw_ofs[:-1]
    not_first = np.ones(n_pieces, dtype=bool)
    not_first[first_pos] = False
    starts[first_pos] = 0.0
    starts[not_first] = ends[np.flatnonzero(not_first) - 1]

    jump_after = np.zeros(n_pieces)
    jump_after[inner] = sizes
    return draw_ofs, ends - starts, jump_after


def _segments(
    levy: LevyLaw,
    durs: np.ndarray,
    rng: np.random.Generator,
    h: float,
    want_sup: bool = False,
):
    """Simulate one regime segment per duration.

    Returns (end_values, exp_integrals, sups).  End values are exact in
    law.  The integral of exp(log level) is exact piecewise closed form
    when the Gaussian part is absent, trapezoid on step <= h otherwise.
    sups (of the log level, including the start at 0) are exact for the
    piecewise-linear case and grid sups otherwise; None unless requested.
    """
    durs = np.asarray(durs, dtype=float)
    n = durs.size
    if n == 0:
        z = np.zeros(0)
        return z, z.copy(), (z.copy() if want_sup else None)
    draw_ofs, piece_dur, jump_after = _build_pieces(levy, durs, rng)

    if levy.gaussian_sigma > 0:
        piece_steps = np.maximum(np.ceil(piece_dur / h), 1.0).astype(np.int64)
        piece_steps[piece_dur <= 0.0] = 0
        norm_ofs = np.zeros(piece_steps.size, dtype=np.int64)
        np.cumsum(piece_steps[:-1], out=norm_ofs[1:])
        total_steps = int(piece_steps.sum())
        normals = rng.standard_normal(total_steps)
        end = np.empty(n)
        integ = np.empty(n)
        sup = np.empty(n)
        brownian_pieces(
            draw_ofs,
            piece_dur,
            jump_after,
            piece_steps,
            norm_ofs,
            normals,
            levy.drift,
            levy.gaussian_sigma,
            end,
            integ,
            sup,
            want_sup,
        )
        return end, integ, (sup if want_sup else None)

    # Piecewise linear: closed-form exponential integrals.
    a = levy.drift
    inc = a * piece_dur + jump_after
    cum = np.zeros(piece_dur.size + 1)
    np.cumsum(inc, out=cum[1:])
    starts_global = cum[:-1]
    base = starts_global[draw_ofs[:-1]]
    piece_count = np.diff(draw_ofs)
    starts = starts_global - np.repeat(base, piece_count)
    if a == 0.0:
        piece_integ = np.exp(starts) * piece_dur
    else:
        piece_integ = np.exp(starts) * np.expm1(a * piece_dur) / a
    integ = np.add.reduceat(piece_integ, draw_ofs[:-1])
    end = cum[draw_ofs[1:]] - base
    sup = None
    if want_sup:
        node_max = np.maximum(starts, starts + a * piece_dur)
        sup = np.maximum.reduceat(node_max, draw_ofs[:-1])
        np.maximum(sup, 0.0, out=sup)
    return end, integ, sup


def _segment_ends(levy: LevyLaw, durs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """End values only (exact in law, no grid, no integrals)."""
    durs = np.asarray(durs, dtype=float)
    n = durs.size
    out = levy.drift * durs
    if levy.gaussian_sigma > 0:
        out = out + levy.gaussian_sigma * np.sqrt(durs) * rng.standard_normal(n)
    if levy.cpp_rate > 0:
        counts = rng.poisson(levy.cpp_rate * durs)
        total = int(counts.sum())
        sizes = levy.cpp_jump.sample(rng, total)
        draw_id = np.repeat(np.arange(n), counts)
        out = out + np.bincount(draw_id, weights=sizes, minlength=n)
    return out


def sample_segment(levy: LevyLaw, duration: float, cfg: SimConfig, rng):
    """One segment: (end value, integral of exp(log level))."""
    if not duration > 0 or not math.isfinite(duration):
        raise ValueError("duration must be finite and positive")
    rng = _coerce_rng(cfg, rng)
    end, integ, _ = _segments(levy, np.array([duration]), rng, cfg.grid_step)
    return float(end[0]), float(integ[0])


# ---------------------------------------------------------------------------
# Cycles
# ---------------------------------------------------------------------------


def sample_cycles(model: MapModel, n: int, cfg: SimConfig, rng):
    """n independent full cycles, vectorized.

    Returns arrays (t2, xi_t2, y_t2, a_t2, b_t2).  The signed integral
    b_t2 weighs each half cycle by its state's sign (start state first).
    """
    if model.killing > 0:
        raise KillingUnsupported("cycles are defined for infinite-lifetime models")
    rng = _coerce_rng(cfg, rng)
    s0 = model.start_state
    s1 = other_state(s0)
    sign0 = 1.0 if s0 == PLUS else -1.0

    zeta0 = rng.exponential(1.0 / model.rate(s0), n)
    end0, integ0, _ = _segments(model.levy(s0), zeta0, rng, cfg.grid_step)
    u0 = model.switch_jump(s0).sample(rng, n)
    zeta1 = rng.exponential(1.0 / model.rate(s1), n)
    end1, integ1, _ = _segments(model.levy(s1), zeta1, rng, cfg.grid_step)
    u1 = model.switch_jump(s1).sample(rng, n)

    w_half = np.exp(end0 + u0)
    xi_t2 = end0 + u0 + end1 + u1
    a_t2 = integ0 + w_half * integ1
    b_t2 = sign0 * (integ0 - w_half * integ1)
    return zeta0 + zeta1, xi_t2, np.exp(xi_t2), a_t2, b_t2


def sample_cycle(model: MapModel, cfg: SimConfig, rng) -> CyclePack:
    t2, xi, y, a, b = sample_cycles(model, 1, cfg, rng)
    return CyclePack(float(t2[0]), float(xi[0]), float(y[0]), float(a[0]), float(b[0]))


# ---------------------------------------------------------------------------
# Exponential functionals
# ---------------------------------------------------------------------------


def _kahan_add(s: np.ndarray, c: np.ndarray, idx: np.ndarray, x: np.ndarray) -> None:
    y = x - c[idx]
    t = s[idx] + y
    c[idx] = (t - s[idx]) - y
    s[idx] = t


def _accumulate_chunk(model: MapModel, n: int, cfg: SimConfig, rng: np.random.Generator):
    """Run the perpetuity recursion for n draws on one stream.

    Returns (a, b, diverged, hit_max_cycles).  Killed models integrate
    over the independent exponential lifetime.  Diverged entries hold the
    partial sums at detection (callers treat the flag as authoritative).
    """
    q_kill = model.killing
    rem = rng.exponential(1.0 / q_kill, n) if q_kill > 0 else None

    sa = np.zeros(n)
    ca = np.zeros(n)
    sb = np.zeros(n)
    cb = np.zeros(n)
    w = np.ones(n)
    active = np.ones(n, dtype=bool)
    diverged = np.zeros(n, dtype=bool)
    hit_max = np.zeros(n, dtype=bool)

    state = model.start_state
    parity = 0
    cycles = 0
    while active.any():
        act = np.flatnonzero(active)
        m = act.size
        sign = 1.0 if state == PLUS else -1.0
        zeta = rng.exponential(1.0 / model.rate(state), m)
        if rem is not None:
            dur = np.minimum(zeta, rem[act])
            dies = zeta >= rem[act]
        else:
            dur = zeta
            dies = None
        end, integ, _ = _segments(model.levy(state), dur, rng, cfg.grid_step)
        # Draws beyond float range overflow to inf here and are censored as
        # diverged below; that only touches levels past exp(~700).
        with np.errstate(over="ignore", invalid="ignore"):
            contrib = w[act] * integ
            _kahan_add(sa, ca, act, contrib)
            _kahan_add(sb, cb, act, sign * contrib)
            u = model.switch_jump(state).sample(rng, m)
            w[act] *= np.exp(end + u)

        if dies is not None:
            dead = act[dies]
            active[dead] = False
            survivors = act[~dies]
            rem[survivors] -= zeta[~dies]
        state = other_state(state)
        parity ^= 1
        if parity == 0:
            cycles += 1
            act = np.flatnonzero(active)
            if act.size:
                w_act = w[act]
                sa_act = sa[act]
                blown = ~np.isfinite(sa_act) | (sa_act > cfg.diverge_threshold)
                done = w_act < cfg.trunc_weight * sa_act
                diverged[act[blown]] = True
                active[act[blown | done]] = False
            if cycles >= cfg.max_cycles:
                left = np.flatnonzero(active)
                diverged[left] = True
                hit_max[left] = True
                active[left] = False
                break
    return sa, sb, diverged, hit_max


def _run_chunks(model: MapModel, n: int, cfg: SimConfig, base_stream: int, threads: int):
    sizes = chunk_sizes(n)

    def worker(i_size):
        i, size = i_size
        rng = stream(cfg.master_seed, base_stream + i)
        return _accumulate_chunk(model, size, cfg, rng)

    jobs = list(enumerate(sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(worker, jobs))
    else:
        parts = [worker(j) for j in jobs]
    a = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    div = np.concatenate([p[2] for p in parts])
    hm = np.concatenate([p[3] for p in parts])
    return a, b, div, hm


def sample_AB_batch(
    model: MapModel, n: int, cfg: SimConfig, base_stream: int = 0, threads: int = 1
):
    """n coupled draws of both functionals.

    Returns (a, b, diverged, hit_max_cycles); the two functionals share
    each draw's path, so their divergence flags coincide by construction.
    """
    return _run_chunks(model, n, cfg, base_stream, threads)


def sample_A_inf(model: MapModel, cfg: SimConfig, rng):
    """One draw of the standard functional, or DIVERGED."""
    rng = _coerce_rng(cfg, rng)
    a, _, div, _ = _accumulate_chunk(model, 1, cfg, rng)
    return DIVERGED if div[0] else float(a[0])


def sample_B_inf(model: MapModel, cfg: SimConfig, rng):
    """One draw of the signed functional, or DIVERGED."""
    rng = _coerce_rng(cfg, rng)
    _, b, div, _ = _accumulate_chunk(model, 1, cfg, rng)
    return DIVERGED if div[0] else float(b[0])


def _xi_t2_values(model: MapModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws of the per-cycle log-level increment (exact, no grid)."""
    s0 = model.start_state
    s1 = other_state(s0)
    z0 = rng.exponential(1.0 / model.rate(s0), n)
    e0 = _segment_ends(model.levy(s0), z0, rng)
    u0 = model.switch_jump(s0).sample(rng, n)
    z1 = rng.exponential(1.0 / model.rate(s1), n)
    e1 = _segment_ends(model.levy(s1), z1, rng)
    u1 = model.switch_jump(s1).sample(rng, n)
    return e0 + u0 + e1 + u1


def sample_xi_T2(model: MapModel, cfg: SimConfig, rng, n: int) -> SampleSet:
    """n i.i.d. draws of the per-cycle log-level increment."""
    if model.killing > 0:
        raise KillingUnsupported("cycle increments need an infinite lifetime")
    rng = _coerce_rng(cfg, rng)
    return SampleSet(
        _xi_t2_values(model, n, rng),
        label="xi_T2",
        model_hash=model.model_hash(),
        master_seed=cfg.master_seed,
    )


def sample_state_at(model: MapModel, t: float, n: int, cfg: SimConfig, rng):
    """(log level, state index) at a fixed time for n independent paths.

    Exact in law: segment end values need no grid.  Used as the
    simulation oracle for the analytic semigroup.
    """
    rng = _coerce_rng(cfg, rng)
    xi = np.zeros(n)
    state_idx = np.zeros(n, dtype=np.int64)
    rem = np.full(n, float(t))
    active = rem > 0
    state = model.start_state
    while active.any():
        act = np.flatnonzero(active)
        zeta = rng.exponential(1.0 / model.rate(state), act.size)
        dur = np.minimum(zeta, rem[act])
        ends = _segment_ends(model.levy(state), dur, rng)
        xi[act] += ends
        finishes = zeta >= rem[act]
        done = act[finishes]
        state_idx[done] = 0 if state == PLUS else 1
        active[done] = False
        survivors = act[~finishes]
        u = model.switch_jump(state).sample(rng, survivors.size)
        xi[survivors] += u
        rem[survivors] -= zeta[~finishes]
        state = other_state(state)
    return xi, state_idx


def affine_fixedpoint_check(
    model: MapModel, cfg: SimConfig, n: int, base_stream: int = 0, threads: int = 1
):
    """Two-sample KS test of ``total == cycle + weight * fresh total``.

    Left sample: n draws of the functional.  Right sample: independent
    cycle statistics combined with an independent batch of totals.
    Returns a dict report; passes at level 0.01 when the two samples are
    statistically indistinguishable.
    """
    from . import finiteness  # runtime import; finiteness depends on sim

    verdict = finiteness.classify_convergence(model, cfg, base_stream=base_stream + 3 * _SPAN)
    if not verdict.convergent:
        raise NotConvergent(f"affine identity needs a convergent model, got {verdict.tag.value}")

    lhs, _, div_l, _ = _run_chunks(model, n, cfg, base_stream, threads)
    hat, _, div_h, _ = _run_chunks(model, n, cfg, base_stream + _SPAN, threads)
    rng = stream(cfg.master_seed, base_stream + 2 * _SPAN)
    _, xi, y, a, _ = sample_cycles(model, n, cfg, rng)
    rhs = a + y * hat
    keep = ~(div_l | div_h)
    lhs, rhs = lhs[keep], rhs[keep]
    scale = max(abs(float(np.median(lhs))), abs(float(np.median(rhs))), 1.0)
    if (
        np.ptp(lhs) <= 1e-9 * scale
        and np.ptp(rhs) <= 1e-9 * scale
        and abs(float(np.median(lhs)) - float(np.median(rhs))) <= 1e-9 * scale
    ):
        # Both sides concentrate on one point up to truncation tolerance.
        statistic, p = 0.0, 1.0
    else:
        statistic, p = ks_two_sample(lhs, rhs)
    return {
        "n": int(keep.sum()),
        "statistic": statistic,
        "p_value": p,
        "pass": bool(p >= 0.01),
        "level": 0.01,
    }


_SPAN = 1 << 16  # sub-stream spacing inside one operation


# ---------------------------------------------------------------------------
# Full path records
# ---------------------------------------------------------------------------


def sample_path(model: MapModel, horizon: float, cfg: SimConfig, rng) -> PathRecord:
    """Full record of one path on [0, horizon] for diagnostics."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = _coerce_rng(cfg, rng)
    lifetime = None
    end_time = horizon
    if model.killing > 0:
        lifetime = float(rng.exponential(1.0 / model.killing))
        end_time = min(horizon, lifetime)

    times = [0.0]
    xi = [0.0]
    marks: list[tuple[float, float, str]] = []
    breakpoints = []
    states = [model.start_state]

    t = 0.0
    level = 0.0
    state = model.start_state
    while t < end_time:
        zeta = float(rng.exponential(1.0 / model.rate(state)))
        seg_end = min(t + zeta, end_time)
        dur = seg_end - t
        levy = model.levy(state)
        # compound Poisson epochs inside the segment
        count = int(rng.poisson(levy.cpp_rate * dur)) if levy.cpp_rate > 0 else 0
        epochs = np.sort(rng.random(count)) * dur + t if count else np.empty(0)
        sizes = levy.cpp_jump.sample(rng, count) if count else np.empty(0)
        cursor = t
        for ep, sz in zip(epochs, sizes):
            level = _advance_linear_or_grid(levy, level, cursor, ep, times, xi, rng, cfg)
            times.append(float(ep))
            xi.append(level + sz)
            marks.append((float(ep), float(sz), "cpp"))
            level += sz
            cursor = ep
        level = _advance_linear_or_grid(levy, level, cursor, seg_end, times, xi, rng, cfg)
        t = seg_end
        if t >= end_time:
            break
        u = float(model.switch_jump(state).sample(rng, 1)[0])
        times.append(t)
        xi.append(level + u)
        marks.append((t, u, "switch"))
        level += u
        breakpoints.append(t)
        state = other_state(state)
        states.append(state)
    return PathRecord(
        horizon=horizon,
        breakpoints=np.array(breakpoints),
        states=states,
        times=np.array(times),
        xi=np.array(xi),
        marks=marks,
        lifetime=lifetime,
    )


def _advance_linear_or_grid(levy, level, t0, t1, times, xi, rng, cfg):
    """Append nodes from t0 to t1 (exclusive of t0) and return the new level."""
    dur = t1 - t0
    if dur <= 0:
        return level
    if levy.gaussian_sigma == 0:
        level += levy.drift * dur
        times.append(float(t1))
        xi.append(level)
        return level
    nsteps = max(1, int(math.ceil(dur / cfg.grid_step)))
    dt = dur / nsteps
    incs = levy.drift * dt + levy.gaussian_sigma * math.sqrt(dt) * rng.standard_normal(nsteps)
    for k in range(nsteps):
        level += float(incs[k])
        times.append(float(t0 + (k + 1) * dt))
        xi.append(level)
    return level


def exp_integral(record: PathRecord, upto: float) -> float:
    """Integral of exp(log level) over [0, min(upto, horizon)].

    Uses the exponential-chord closed form on each inter-node piece, so
    it is exact wherever the path is piecewise linear.
    """
    t = record.times
    v = record.xi
    total = 0.0
    upto = min(upto, float(t[-1]))
    for i in range(len(t) - 1):
        t0, t1 = t[i], min(t[i + 1], upto)
        if t1 <= t0:
            if t[i] >= upto:
                break
            continue
        dt = t1 - t0
        slope = (v[i + 1] - v[i]) / (t[i + 1] - t[i])
        if slope == 0.0:
            total += math.exp(v[i]) * dt
        else:
            total += math.exp(v[i]) * math.expm1(slope * dt) / slope
    return total
