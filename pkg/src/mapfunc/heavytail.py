"""Heavy-tail asymptotics of the standard exponential functional.

When the dominant component of the decomposition has a strong
subexponential right tail (power law with index above 1, or lognormal),
the functional's survival behaves like the integrated tail of the cycle
increment evaluated at log scale, divided by |mean cycle increment|.
This module classifies models by their dominant tail, builds the
analytic prediction, compares it against sampled functionals, and
implements the supporting numerical checks:

* an exponential-horizon bound for the supremum of one regime segment,
* the renewal series representation of an integrated tail,
* the affine-barrier excursion cascade with its crossing-count bound on
  the log functional, and
* the first-passage probability of the embedded cycle walk against the
  integrated tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EpsilonOutOfRange,
    EpsilonTooLarge,
    LevelTooSmall,
    NotOfTypeError,
    PositiveDrift,
)
from .model import (
    JumpLaw,
    LevyLaw,
    LogNormal,
    MapModel,
    MINUS,
    ParetoPositive,
    PLUS,
    STATES,
    TailClass,
    UNDEFINED,
    drift_K,
    other_state,
)
from .rngstreams import stream
from .sim import SimConfig, sample_AB_batch
from .stats import SampleSet

__all__ = [
    "IntegratedTail",
    "integrated_tail",
    "NOT_OF_TYPE",
    "SubexpClass",
    "strong_subexp_classify",
    "subexp_prediction",
    "subexp_compare",
    "SubexpReport",
    "willekens_check",
    "tailsum_check",
    "excursion_decompose",
    "ExcursionStats",
    "logA_bound_check",
    "ladder_hit_prob",
]

COMPONENTS = ("xiPlusAtZeta", "xiMinusAtZeta", "uPlus", "uMinus")

RESIDUAL_TARGET = 1e-4  # excursion / first-passage truncation budget


# ---------------------------------------------------------------------------
# Integrated tails
# ---------------------------------------------------------------------------


@dataclass
class IntegratedTail:
    """min(1, integral of the survival beyond x), tabulated on a grid.

    ``at`` evaluates off-grid through the underlying exact evaluator
    (closed form or quadrature for analytic sources, the exact partial
    mean for empirical ones).
    """

    grid: np.ndarray
    values: np.ndarray
    provenance: str  # "Analytic" | "Empirical"
    _eval: object = field(repr=False, default=None)

    def at(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.minimum(1.0, np.array([self._eval(v) for v in xs]))
        return out if np.ndim(x) else float(out[0])


def integrated_tail(source, grid) -> IntegratedTail:
    """Integrated right tail of a jump law or of a sample."""
    grid = np.asarray(grid, dtype=float)
    if isinstance(source, JumpLaw):
        evaluator = source.integrated_survival
        provenance = "Analytic"
    elif isinstance(source, SampleSet):
        srt = source.sorted_values()
        suffix = np.concatenate([np.cumsum(srt[::-1])[::-1], [0.0]])

        def evaluator(x: float) -> float:
            i = np.searchsorted(srt, x, side="right")
            cnt = srt.size - i
            return (suffix[i] - x * cnt) / srt.size

        provenance = "Empirical"
    else:
        raise TypeError("source must be a JumpLaw or a SampleSet")
    values = np.minimum(1.0, np.array([evaluator(x) for x in grid]))
    return IntegratedTail(grid=grid, values=values, provenance=provenance, _eval=evaluator)


def _levy_exp_time_tail(levy: LevyLaw, q: float):
    """Integrated right tail of one regime's value at its exponential clock.

    First-order analytic approximation: a heavy compound-Poisson part
    contributes its expected per-segment jump count times the jump's
    integrated tail; the diffusive/drift part contributes its exact
    exponential tail.  Arguments below zero return a linear bound, which
    only feeds the min(1, .) cap.
    """
    parts = []
    if levy.cpp_rate > 0:
        weight = levy.cpp_rate / q
        jump = levy.cpp_jump
        parts.append(lambda y, w=weight, j=jump: w * j.integrated_survival(max(y, 0.0)))
    a, sg = levy.drift, levy.gaussian_sigma
    if sg > 0:
        root = math.sqrt(a * a + 2.0 * sg * sg * q)
        theta_pos = (-a + root) / (sg * sg)
        theta_neg = (a + root) / (sg * sg)
        coeff = theta_neg / (theta_pos + theta_neg)
        parts.append(lambda y, c=coeff, th=theta_pos: c * math.exp(-th * max(y, 0.0)) / th)
    elif a > 0:
        parts.append(lambda y, a=a, q=q: (a / q) * math.exp(-q * max(y, 0.0) / a))

    def g(y: float) -> float:
        total = sum(p(y) for p in parts)
        if y < 0:
            total += -y  # survival <= 1 bound below zero; the cap absorbs it
        return total

    return g


def _phase_member_tails(model: MapModel, beta: str):
    """The two tail evaluators of phase beta: the regime value at its clock
    and the jump applied on entering beta."""
    levy_g = _levy_exp_time_tail(model.levy(beta), model.rate(beta))
    entering_jump = model.switch_jump(other_state(beta))
    return levy_g, entering_jump.integrated_survival


def cycle_integrated_tail(model: MapModel):
    """Callable min(1, sum of all component integrated tails) across phases."""
    gs = []
    for beta in STATES:
        levy_g, jump_g = _phase_member_tails(model, beta)
        gs += [levy_g, jump_g]

    def h(y: float) -> float:
        return min(1.0, sum(min(1.0, g(y)) for g in gs))

    return h


def _cycle_uncapped_tail(model: MapModel):
    gs = []
    for beta in STATES:
        levy_g, jump_g = _phase_member_tails(model, beta)
        gs += [levy_g, jump_g]
    return lambda y: sum(g(y) for g in gs)


# ---------------------------------------------------------------------------
# Strong subexponential classification
# ---------------------------------------------------------------------------


class _NotOfType:
    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "NotOfType"


NOT_OF_TYPE = _NotOfType()


@dataclass(frozen=True)
class _TailDesc:
    kind: str  # "light" | "lognormal" | "pareto"
    param: float = 0.0  # pareto index / lognormal log-stdev

    def heaviness(self) -> tuple:
        if self.kind == "pareto":
            return (2, -self.param)
        if self.kind == "lognormal":
            return (1, self.param)
        return (0, 0.0)

    def ties(self, o: "_TailDesc") -> bool:
        return self.kind == o.kind and self.param == o.param


def _describe_law(law: JumpLaw) -> _TailDesc:
    cls = law.right_tail_class()
    if cls is TailClass.LIGHT:
        return _TailDesc("light")
    if isinstance(law, ParetoPositive):
        return _TailDesc("pareto", law.index)
    if isinstance(law, LogNormal):
        return _TailDesc("lognormal", law.log_stdev)
    return _TailDesc("light")


def _component_descriptors(model: MapModel) -> dict[str, _TailDesc]:
    def levy_desc(levy: LevyLaw) -> _TailDesc:
        if levy.cpp_rate > 0:
            return _describe_law(levy.cpp_jump)
        return _TailDesc("light")

    return {
        "xiPlusAtZeta": levy_desc(model.levy_plus),
        "xiMinusAtZeta": levy_desc(model.levy_minus),
        "uPlus": _describe_law(model.u_plus),
        "uMinus": _describe_law(model.u_minus),
    }


@dataclass
class SubexpClass:
    dominant_component: str
    dominant_tail: _TailDesc
    dominant_set: tuple[str, ...]  # phases whose combined tail is not negligible
    descriptors: dict[str, _TailDesc]

    def to_dict(self) -> dict:
        return {
            "dominantComponent": self.dominant_component,
            "dominantTail": {"kind": self.dominant_tail.kind, "param": self.dominant_tail.param},
            "dominantSet": list(self.dominant_set),
        }


def _phase_components(beta: str) -> tuple[str, str]:
    """Component names contributing to phase beta's combined tail."""
    levy_name = "xiPlusAtZeta" if beta == PLUS else "xiMinusAtZeta"
    entering = "uMinus" if beta == PLUS else "uPlus"
    return levy_name, entering


def strong_subexp_classify(model: MapModel):
    """Dominant-tail classification from the declared parametric classes.

    The dominance order is hard coded per family (smaller power index is
    heavier; any power law beats lognormal; among lognormals the larger
    log-stdev wins, equal log-stdev ties regardless of location; ties of
    power indices ignore scale).  Returns NOT_OF_TYPE when no component
    has a strong subexponential right tail.
    """
    k = drift_K(model)
    if k is UNDEFINED or not (isinstance(k, float) and math.isfinite(k) and k < 0):
        raise PositiveDrift(f"classification needs finite K < 0, got {k!r}")
    desc = _component_descriptors(model)
    dominant_name = max(COMPONENTS, key=lambda name: desc[name].heaviness())
    dominant = desc[dominant_name]
    if dominant.kind == "light":
        return NOT_OF_TYPE
    phases = tuple(
        beta
        for beta in STATES
        if any(desc[name].ties(dominant) for name in _phase_components(beta))
    )
    return SubexpClass(
        dominant_component=dominant_name,
        dominant_tail=dominant,
        dominant_set=phases,
        descriptors=desc,
    )


def _classify_or_raise(model: MapModel) -> SubexpClass:
    info = strong_subexp_classify(model)
    if info is NOT_OF_TYPE:
        raise NotOfTypeError("no dominant strong-subexponential component")
    return info


@dataclass
class PredictionCurve:
    x: np.ndarray
    survival: np.ndarray
    h_at_log: object = field(repr=False, default=None)  # callable y -> capped tail
    scale: float = 0.0  # 1 / (mean cycle time * |K|)


def subexp_prediction(model: MapModel, x_grid) -> PredictionCurve:
    """Predicted survival of the functional on a grid.

    The prediction is the combined integrated tail of the dominant
    phases, evaluated at log(x), divided by mean cycle time times |K|.
    The combined tail includes both members of each dominant phase and is
    capped at 1, which also caps the prediction below the asymptotic
    scale factor for small x.
    """
    info = _classify_or_raise(model)
    k = drift_K(model)
    et2 = model.mean_cycle_time()
    # The asymptotic constant divides by |K| (a survival probability is
    # positive; the raw signed form would not be).
    scale = 1.0 / (et2 * abs(k))
    members = []
    for beta in info.dominant_set:
        levy_g, jump_g = _phase_member_tails(model, beta)
        members += [levy_g, jump_g]

    def h_at(y: float) -> float:
        return min(1.0, sum(min(1.0, g(y)) for g in members))

    x = np.asarray(x_grid, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x grid must be positive")
    vals = np.array([min(1.0, scale * h_at(math.log(v))) for v in x])
    return PredictionCurve(x=x, survival=vals, h_at_log=h_at, scale=scale)


@dataclass
class SubexpReport:
    classification: SubexpClass
    x: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    ratio: np.ndarray
    band: tuple[float, float]
    in_band: bool
    trending: bool
    verdict: str
    diverged_fraction: float
    n: int

    def to_dict(self) -> dict:
        out = self.classification.to_dict()
        out.update(
            {
                "x": self.x.tolist(),
                "empirical": self.empirical.tolist(),
                "predicted": self.predicted.tolist(),
                "ratio": self.ratio.tolist(),
                "band": list(self.band),
                "inBand": self.in_band,
                "trending": self.trending,
                "verdict": self.verdict,
                "divergedFraction": self.diverged_fraction,
                "n": self.n,
            }
        )
        return out


def subexp_compare(
    model: MapModel,
    cfg: SimConfig,
    n: int,
    x_grid=None,
    base_stream: int = 0,
    threads: int = 1,
    window: tuple[float, float] = (1e-2, 1e-4),
    band: tuple[float, float] = (0.5, 2.0),
    grid_points: int = 25,
) -> SubexpReport:
    """Empirical survival of the functional against the prediction.

    The default grid spans the empirical quantiles at the survival window
    levels.  PASS requires every ratio inside the band over that central
    window and a trend toward 1 (mean |log ratio| over the deeper half
    not above the shallower half).  Convergence is logarithmic, hence the
    deliberately wide band.
    """
    _classify_or_raise(model)
    a, _, diverged, _ = sample_AB_batch(model, n, cfg, base_stream, threads)
    vals = a[~diverged]
    div_frac = float(diverged.mean())
    srt = np.sort(vals)
    if x_grid is None:
        s_hi, s_lo = max(window), min(window)
        t_lo = srt[int(srt.size * (1 - s_hi))]
        t_hi = srt[int(srt.size * (1 - s_lo))]
        if not (t_lo > 0 and t_hi > t_lo):
            raise ValueError("window thresholds must be positive and increasing")
        x = np.geomspace(t_lo, t_hi, grid_points)
    else:
        x = np.asarray(x_grid, dtype=float)
    emp = (srt.size - np.searchsorted(srt, x, side="right")) / srt.size
    pred = subexp_prediction(model, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = emp / pred.survival
    ok = np.isfinite(ratio) & (ratio > 0)
    in_band = bool(ok.all() and (ratio >= band[0]).all() and (ratio <= band[1]).all())
    # Trend toward 1: the deepest third of the window sits closer to 1 (in
    # log distance) than the shallowest third.
    third = max(len(x) // 3, 1)
    shallow, deep = ok[:third], ok[-third:]
    if shallow.sum() and deep.sum():
        logr = np.abs(np.log(ratio, where=ok, out=np.full_like(ratio, np.nan)))
        trending = bool(np.nanmean(logr[-third:]) <= np.nanmean(logr[:third]))
    else:
        trending = False
    info = strong_subexp_classify(model)
    return SubexpReport(
        classification=info,
        x=x,
        empirical=emp,
        predicted=pred.survival,
        ratio=ratio,
        band=band,
        in_band=in_band,
        trending=trending,
        verdict="PASS" if (in_band and trending) else "FAIL",
        diverged_fraction=div_frac,
        n=n,
    )


# ---------------------------------------------------------------------------
# Segment-supremum bound check
# ---------------------------------------------------------------------------


def willekens_check(
    levy: LevyLaw,
    q: float,
    u: float,
    u0: float,
    n: int,
    cfg: SimConfig,
    base_stream: int = 0,
) -> dict:
    """Monte Carlo check of the exponential-horizon supremum bound.

    lhs = P(sup of the segment before an independent Exp(q) clock > u);
    rhs = P(end >= u - u0) / P(end >= -u0).  The bound asserts
    lhs <= rhs; ok allows 3 combined standard errors of slack.
    """
    if not (0 < u0 < u):
        raise ValueError("need 0 < u0 < u")
    from .sim import _segments  # shared segment machinery

    rng = stream(cfg.master_seed, base_stream)
    taus = rng.exponential(1.0 / q, n)
    end, _, sup = _segments(levy, taus, rng, cfg.grid_step, want_sup=True)
    lhs = float(np.mean(sup > u))
    p1 = float(np.mean(end >= u - u0))
    p2 = float(np.mean(end >= -u0))
    rhs = p1 / p2 if p2 > 0 else math.inf
    se_lhs = math.sqrt(max(lhs * (1 - lhs), 1e-12) / n)
    if p2 > 0:
        var_r = max(p1 * (1 - p1) / p2**2 - p1**2 * (1 - p2) / p2**3, 0.0) / n
    else:
        var_r = 0.0
    se_rhs = math.sqrt(var_r)
    slack = 3.0 * math.hypot(se_lhs, se_rhs)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "seLhs": se_lhs,
        "seRhs": se_rhs,
        "ok": bool(lhs <= rhs + slack),
        "n": n,
    }


# ---------------------------------------------------------------------------
# Renewal series form of the integrated tail
# ---------------------------------------------------------------------------


def tailsum_check(
    law: JumpLaw,
    q_plus: float,
    q_minus: float,
    k_value: float,
    eps: float,
    x_grid,
    n_t: int,
    master_seed: int = 0,
    base_stream: int = 0,
) -> dict:
    """Integrated tail versus its cycle-clock renewal series.

    LHS is the analytic integrated tail; RHS is mean cycle time times
    |K+eps| times the series of survivals at drift-shifted cycle times,
    averaged over simulated clock trajectories.  The series is truncated
    once terms fall below 1e-15 of the running sum, the per-trajectory
    cycle budget derived from ``n_t`` is exhausted, with the remaining
    tail completed by its renewal-integral estimate (negligible once the
    terms have decayed; the pre-check below rejects drifts too weak for
    that to happen within budget).
    """
    drift = k_value + eps
    if not drift < 0:
        raise EpsilonTooLarge("need K + eps < 0")
    et2 = 1.0 / q_plus + 1.0 / q_minus
    d = -drift
    x = np.asarray(x_grid, dtype=float)
    x_top = float(x.max())

    g_top = law.integrated_survival(x_top)
    if not (math.isfinite(g_top) and g_top > 0):
        raise ValueError("law must have a finite positive integrated tail on the grid")
    # Precheck: cycles until the remaining series tail is below 0.1% of the
    # total, using the analytic integrated tail at the drifted argument.
    n_star = 1
    while law.integrated_survival(x_top + d * et2 * n_star) > 1e-3 * g_top:
        n_star *= 2
        if n_star > n_t:
            raise EpsilonTooLarge(
                f"drift margin {drift:g} needs > {n_t} cycles per trajectory"
            )

    n_traj = int(min(4096, max(32, n_t // max(n_star, 1))))
    budget = max(1, n_t // n_traj)
    rng = stream(master_seed, base_stream)
    t = np.zeros(n_traj)
    sums = np.zeros(x.size)
    steps = 0
    while True:
        shifted = x[:, None] + d * t[None, :]
        term = law.survival(shifted).mean(axis=1)
        sums += term
        steps += 1
        if steps >= budget:
            break
        if np.all(term <= 1e-15 * np.maximum(sums, 1e-300)):
            break
        t += rng.exponential(1.0 / q_plus, n_traj)
        t += rng.exponential(1.0 / q_minus, n_traj)
    # Renewal-integral completion of the untabulated tail.
    completion = np.array(
        [
            np.mean([law.integrated_survival(xi + d * tj) for tj in t]) / (d * et2)
            for xi in x
        ]
    )
    rhs = et2 * d * sums + et2 * d * completion
    lhs = np.array([law.integrated_survival(xi) for xi in x])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = lhs / rhs
    return {
        "x": x.tolist(),
        "lhs": lhs.tolist(),
        "rhs": rhs.tolist(),
        "ratio": ratio.tolist(),
        "trajectories": n_traj,
        "cyclesPerTrajectory": steps,
        "notLongTailed": law.right_tail_class() is TailClass.LIGHT,
    }


# ---------------------------------------------------------------------------
# Excursions over the affine barrier
# ---------------------------------------------------------------------------


@dataclass
class _PathExcursions:
    n: int
    z: list[float]
    k: list[str]
    attempts: list[tuple[str, str | None]]  # (anchor state, crossing state or None)
    log_integral: float


def _excursion_path(
    model: MapModel,
    rng: np.random.Generator,
    drift: float,  # K + eps (negative)
    level_a: float,
    horizon: float,
    h: float,
) -> _PathExcursions:
    """One path's crossing cascade against the affine barrier.

    Works in rebased coordinates w(t) = xi(t) - drift*t: a crossing
    happens when w rises level_a above its value at the previous
    crossing.  Piecewise-linear paths get exact crossing points; a
    diffusive part is checked on the integration grid (documented
    under-detection of order sqrt(h)).
    """
    t = 0.0
    xi = 0.0
    anchor_w, anchor_t = 0.0, 0.0
    anchor_state = model.start_state
    state = model.start_state
    n_cross = 0
    zs: list[float] = []
    ks: list[str] = []
    attempts: list[tuple[str, str | None]] = []
    integral = 0.0

    def cross(w_cross: float, t_cross: float, at_state: str):
        nonlocal anchor_w, anchor_t, anchor_state, n_cross
        zs.append((w_cross - anchor_w) + drift * (t_cross - anchor_t))
        ks.append(at_state)
        attempts.append((anchor_state, at_state))
        anchor_w, anchor_t, anchor_state = w_cross, t_cross, at_state
        n_cross += 1

    while t < horizon:
        levy = model.levy(state)
        zeta = float(rng.exponential(1.0 / model.rate(state)))
        seg_end = min(t + zeta, horizon)
        completes = (t + zeta) <= horizon
        dur = seg_end - t
        if levy.cpp_rate > 0:
            cnt = int(rng.poisson(levy.cpp_rate * dur))
        else:
            cnt = 0
        if cnt:
            epochs = np.sort(rng.random(cnt)) * dur + t
            sizes = levy.cpp_jump.sample(rng, cnt)
        else:
            epochs = ()
            sizes = ()
        bounds: list[tuple[float, float | None, bool]] = [
            (float(e), float(s), False) for e, s in zip(epochs, sizes)
        ]
        if completes:
            u = float(model.switch_jump(state).sample(rng, 1)[0])
            bounds.append((seg_end, u, True))
        else:
            bounds.append((seg_end, None, False))

        a, sg = levy.drift, levy.gaussian_sigma
        cursor = t
        for pe, jump, is_switch in bounds:
            pd = pe - cursor
            if pd > 0:
                if sg == 0:
                    # integral and exact crossings on the linear piece
                    if a == 0.0:
                        integral += math.exp(xi) * pd
                    else:
                        integral += math.exp(xi) * math.expm1(a * pd) / a
                    slope_w = a - drift
                    if slope_w > 0:
                        pos = cursor
                        w_pos = xi - drift * cursor
                        while True:
                            need = (anchor_w + level_a) - w_pos
                            tau = pos + need / slope_w
                            if tau > pe:
                                break
                            cross(anchor_w + level_a, tau, state)
                            w_pos = anchor_w  # w at tau equals the new anchor
                            pos = tau
                    xi += a * pd
                else:
                    nsteps = max(1, int(math.ceil(pd / h)))
                    dt = pd / nsteps
                    incs = a * dt + sg * math.sqrt(dt) * rng.standard_normal(nsteps)
                    e_prev = math.exp(xi)
                    for kstep in range(nsteps):
                        xi += float(incs[kstep])
                        e_new = math.exp(xi)
                        integral += 0.5 * (e_prev + e_new) * dt
                        e_prev = e_new
                        node_t = cursor + (kstep + 1) * dt
                        w_node = xi - drift * node_t
                        if w_node >= anchor_w + level_a:
                            cross(w_node, node_t, state)
            if jump is not None:
                xi += jump
                w_at = xi - drift * pe
                if w_at >= anchor_w + level_a:
                    # A switch jump lands at the switch instant, where the
                    # chain already occupies the entered state.
                    cross(w_at, pe, other_state(state) if is_switch else state)
            cursor = pe
        t = seg_end
        if completes:
            state = other_state(state)
    attempts.append((anchor_state, None))
    return _PathExcursions(
        n=n_cross, z=zs, k=ks, attempts=attempts, log_integral=math.log(integral)
    )


def _default_horizon(model: MapModel, eps: float, level_a: float) -> float:
    """Horizon with residual crossing probability below the target.

    Uses the renewal-series bound: the chance of a first crossing after
    lag t is at most about G_cycle(level_a + eps*t) / (eps * mean cycle
    time), with G_cycle the summed component integrated tails.  Solved by
    doubling; a safety factor 2 on top.
    """
    g_cycle = _cycle_uncapped_tail(model)
    et2 = model.mean_cycle_time()
    target = RESIDUAL_TARGET * eps * et2
    hzn = max(8.0 * et2, level_a / eps)
    while g_cycle(level_a + eps * hzn) > target:
        hzn *= 2.0
        if hzn > 1e9:
            raise LevelTooSmall("residual calibration did not converge")
    return 2.0 * hzn


@dataclass
class ExcursionStats:
    epsilon: float
    level_a: float
    c_bound: float
    horizon: float
    residual_bound: float
    n_paths: int
    per_path_n: np.ndarray
    per_path_z: list[list[float]]
    per_path_k: list[list[str]]
    eta: dict  # (alpha, beta) -> rate, plus absorption per alpha
    crossing_prob: dict  # alpha -> crossing fraction over attempts
    n_histogram: dict
    bound_violations: int
    grid_sensitivity: dict | None = None

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "levelA": self.level_a,
            "C": self.c_bound,
            "horizon": self.horizon,
            "residualBound": self.residual_bound,
            "nPaths": self.n_paths,
            "eta": {f"{a}->{b}": v for (a, b), v in self.eta.items()},
            "crossingProb": dict(self.crossing_prob),
            "nHistogram": {str(k): v for k, v in sorted(self.n_histogram.items())},
            "boundViolations": self.bound_violations,
            "gridSensitivity": self.grid_sensitivity,
        }


def _eta_from_attempts(all_attempts: list[tuple[str, str | None]]):
    from_counts = {PLUS: 0, MINUS: 0}
    trans: dict[tuple[str, str], int] = {}
    for frm, to in all_attempts:
        from_counts[frm] += 1
        key = (frm, to if to is not None else "inf")
        trans[key] = trans.get(key, 0) + 1
    eta = {}
    crossing = {}
    for frm in STATES:
        denom = from_counts[frm]
        crossed = 0
        for to in STATES:
            cnt = trans.get((frm, to), 0)
            crossed += cnt
            eta[(frm, to)] = cnt / denom if denom else 0.0
        eta[(frm, "inf")] = trans.get((frm, "inf"), 0) / denom if denom else 0.0
        crossing[frm] = crossed / denom if denom else 0.0
    return eta, crossing, from_counts


def _run_excursions(model, cfg, eps, level_a, n_paths, base_stream, horizon, h):
    k = drift_K(model)
    drift = k + eps
    paths = []
    for i in range(n_paths):
        rng = stream(cfg.master_seed, base_stream + i)
        paths.append(_excursion_path(model, rng, drift, level_a, horizon, h))
    return paths


def excursion_decompose(
    model: MapModel,
    cfg: SimConfig,
    eps: float,
    level_a: float,
    n_paths: int,
    base_stream: int = 0,
    horizon: float | None = None,
) -> ExcursionStats:
    """Crossing cascade statistics against the affine barrier.

    A cascade stops when no further crossing occurs before the horizon;
    the horizon is calibrated so the missed-crossing probability is below
    1e-4 per excursion, and that residual is reported as the bias bound
    on the crossing counts.  With a diffusive part present, a re-run at
    half the grid step quantifies the crossing under-detection.
    """
    k = drift_K(model)
    if k is UNDEFINED or not (isinstance(k, float) and math.isfinite(k) and k < 0):
        raise PositiveDrift(f"excursions need finite K < 0, got {k!r}")
    if not (0 < eps < -k):
        raise EpsilonOutOfRange(f"eps must lie in (0, {-k:g})")
    if horizon is None:
        horizon = _default_horizon(model, eps, level_a)
    h = cfg.grid_step
    paths = _run_excursions(model, cfg, eps, level_a, n_paths, base_stream, horizon, h)

    all_attempts = [a for p in paths for a in p.attempts]
    eta, crossing, _ = _eta_from_attempts(all_attempts)
    if max(crossing.values()) >= 0.99:
        raise LevelTooSmall(
            "nearly every excursion crosses; raise the barrier level"
        )
    ns = np.array([p.n for p in paths])
    hist: dict[int, int] = {}
    for v in ns:
        hist[int(v)] = hist.get(int(v), 0) + 1

    sensitivity = None
    if model.levy_plus.gaussian_sigma > 0 or model.levy_minus.gaussian_sigma > 0:
        fine = _run_excursions(
            model, cfg, eps, level_a, n_paths, base_stream, horizon, h / 2
        )
        eta_fine, _, _ = _eta_from_attempts([a for p in fine for a in p.attempts])
        sensitivity = {
            "gridStep": h,
            "meanNDelta": float(np.mean([p.n for p in fine]) - ns.mean()),
            "etaDelta": {
                f"{a}->{b}": eta_fine[(a, b)] - eta[(a, b)]
                for a in STATES
                for b in STATES
            },
        }

    c_bound = level_a - math.log(-(k + eps))
    return ExcursionStats(
        epsilon=eps,
        level_a=level_a,
        c_bound=c_bound,
        horizon=horizon,
        residual_bound=RESIDUAL_TARGET,
        n_paths=n_paths,
        per_path_n=ns,
        per_path_z=[p.z for p in paths],
        per_path_k=[p.k for p in paths],
        eta=eta,
        crossing_prob=crossing,
        n_histogram=hist,
        bound_violations=0,
        grid_sensitivity=sensitivity,
    )


def logA_bound_check(
    model: MapModel,
    cfg: SimConfig,
    eps: float,
    level_a: float,
    horizon: float,
    n_paths: int,
    base_stream: int = 0,
    c_override: float | None = None,
) -> dict:
    """Count violations of the crossing-count bound on the log functional.

    Each path's truncated functional (integral up to the horizon) must
    satisfy log(value) <= (N+1)C + sum of positive crossing increments,
    with N and the increments taken from the same path up to the same
    horizon.  The truncated functional is dominated by the full one, so
    any violation falsifies the bound.  ``c_override`` exists for
    negative controls.
    """
    k = drift_K(model)
    if k is UNDEFINED or not (isinstance(k, float) and math.isfinite(k) and k < 0):
        raise PositiveDrift(f"bound check needs finite K < 0, got {k!r}")
    if not (0 < eps < -k):
        raise EpsilonOutOfRange(f"eps must lie in (0, {-k:g})")
    c_bound = level_a - math.log(-(k + eps))
    if math.exp(c_bound) <= 2.0:
        raise LevelTooSmall("need exp(C) > 2; raise the barrier level")
    c_used = c_bound if c_override is None else c_override
    violations = 0
    margins = []
    for i in range(n_paths):
        rng = stream(cfg.master_seed, base_stream + i)
        p = _excursion_path(model, rng, k + eps, level_a, horizon, cfg.grid_step)
        bound = (p.n + 1) * c_used + sum(max(z, 0.0) for z in p.z)
        margins.append(bound - p.log_integral)
        if p.log_integral > bound + 1e-9:
            violations += 1
    return {
        "nPaths": n_paths,
        "violations": violations,
        "C": c_used,
        "minMargin": float(min(margins)) if margins else math.nan,
    }


# ---------------------------------------------------------------------------
# First passage of the embedded cycle walk
# ---------------------------------------------------------------------------


def ladder_hit_prob(
    model: MapModel,
    cfg: SimConfig,
    x_grid,
    n_paths: int,
    base_stream: int = 0,
) -> dict:
    """P(the cycle walk ever reaches x) against H(x)/|mean cycle increment|.

    Walks are stopped once they fall below a level at which the analytic
    residual first-passage probability is under 1e-4 of the target
    probability at the deepest grid point.  For light-tailed models the
    ratio curve decays instead of stabilizing (diagnostic only).
    """
    from .sim import _xi_t2_values

    k = drift_K(model)
    if k is UNDEFINED or not (isinstance(k, float) and math.isfinite(k) and k < 0):
        raise PositiveDrift(f"first-passage check needs finite K < 0, got {k!r}")
    e_abs = abs(k) * model.mean_cycle_time()
    x = np.asarray(x_grid, dtype=float)
    x_top = float(x.max())
    g_cycle = _cycle_uncapped_tail(model)
    target = RESIDUAL_TARGET * max(g_cycle(x_top), 1e-300)
    stop_m = max(4.0 * e_abs, x_top)
    while g_cycle(x_top + stop_m) > target:
        stop_m *= 2.0
        if stop_m > 1e12:
            break

    rng = stream(cfg.master_seed, base_stream)
    walk = np.zeros(n_paths)
    best = np.full(n_paths, -math.inf)
    active = np.ones(n_paths, dtype=bool)
    max_rounds = int(200 + 60 * stop_m / e_abs)
    rounds = 0
    while active.any() and rounds < max_rounds:
        act = np.flatnonzero(active)
        inc = _xi_t2_values(model, act.size, rng)
        walk[act] += inc
        best[act] = np.maximum(best[act], walk[act])
        active[act[walk[act] < -stop_m]] = False
        rounds += 1
    phat = (best[None, :] >= x[:, None]).mean(axis=1)
    h_vals = np.array([min(1.0, g_cycle(v)) for v in x])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = phat * e_abs / h_vals
    return {
        "x": x.tolist(),
        "hitProb": phat.tolist(),
        "h": h_vals.tolist(),
        "ratio": ratio.tolist(),
        "stopLevel": float(stop_m),
        "roundsCap": max_rounds,
        "unfinishedPaths": int(active.sum()),
    }
