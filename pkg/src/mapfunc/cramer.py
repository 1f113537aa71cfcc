"""Tail exponent and tail constants in the light-tailed regime.

When the long-run drift is negative and the transform matrix exists on a
positive interval, its leading eigenvalue is convex, vanishes at zero and
starts decreasing, so it has at most one positive root.  That root is the
polynomial tail exponent of the exponential functionals; the mean-one
product identity for the per-cycle weight pins it analytically, and the
tail constants are read off sampled functionals on a survival-quantile
window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import PositiveDrift, SubcriticalityViolated, WindowTooDeep
from .model import (
    MapModel,
    UNDEFINED,
    drift_K,
    leading_eigenvalue,
    transform_domain_sup,
)
from .stats import SampleSet, bootstrap_ci

__all__ = [
    "RootStatus",
    "find_cramer_root",
    "verify_mean_one",
    "check_moment_condition",
    "estimate_tail_constant",
    "moment_explosion_scan",
    "lattice_guard",
    "TailConstantFit",
    "CramerReport",
    "build_cramer_report",
]

EDGE_MARGIN = 1e-9
NON_PLATEAU_SLOPE = 0.1
_DOUBLING_CAP = 2.0**50


class RootStatus(enum.Enum):
    NO_ROOT = "NoRoot"
    DOMAIN_TOO_SMALL = "DomainTooSmall"


def _require_negative_drift(model: MapModel) -> float:
    k = drift_K(model)
    if k is UNDEFINED or not k < 0:
        raise PositiveDrift(f"needs K < 0, got K = {k!r}")
    return k


def find_cramer_root(model: MapModel, tol: float = 1e-12):
    """Unique positive root of the leading eigenvalue, if any.

    Brackets by doubling (the eigenvalue is convex, zero at the origin
    and initially decreasing), then bisects to |value| < tol.  Returns
    the root, or RootStatus.NO_ROOT when the eigenvalue stays negative on
    an unbounded domain, or RootStatus.DOMAIN_TOO_SMALL when the
    transform domain ends before a sign change.
    """
    _require_negative_drift(model)
    z_sup = transform_domain_sup(model)
    if z_sup <= EDGE_MARGIN:
        return RootStatus.DOMAIN_TOO_SMALL
    hi_limit = z_sup - EDGE_MARGIN if math.isfinite(z_sup) else math.inf

    def lam(z: float) -> float | None:
        return leading_eigenvalue(model, z)

    lo = 0.0
    z = min(1.0, hi_limit / 2) if math.isfinite(hi_limit) else 1.0
    while True:
        val = lam(z)
        if val is None:
            # Inside the nominal domain a transform refused to evaluate;
            # treat like a domain edge.
            return RootStatus.DOMAIN_TOO_SMALL
        if val > tol:
            break
        if abs(val) <= tol:
            return z
        lo = z
        if z >= hi_limit * (1.0 - 1e-12):
            return RootStatus.DOMAIN_TOO_SMALL
        if z > _DOUBLING_CAP:
            probe = lam(z / 2)
            if probe is not None and val <= probe:
                return RootStatus.NO_ROOT  # convex and still nonincreasing
            if z > 2.0**200:
                return RootStatus.NO_ROOT
        z = min(2.0 * z, hi_limit)

    hi = z
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = lam(mid)
        if val is None:
            hi = mid
            continue
        if abs(val) <= tol:
            return mid
        if val > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def verify_mean_one(model: MapModel, kappa: float) -> float:
    """Residual of the mean-one identity for the cycle weight at kappa.

    Computes E[weight^kappa] through the product of the per-regime
    exponential-time transforms and the switch-jump transforms, and
    returns it minus 1.  Requires both regime Laplace exponents to stay
    below their switching rates at kappa.
    """
    psi_p = model.levy_plus.psi(kappa)
    psi_m = model.levy_minus.psi(kappa)
    g_p = model.u_plus.mgf(kappa)
    g_m = model.u_minus.mgf(kappa)
    if None in (psi_p, psi_m, g_p, g_m):
        raise SubcriticalityViolated("a transform is undefined at kappa")
    if psi_p >= model.q_plus or psi_m >= model.q_minus:
        raise SubcriticalityViolated(
            "regime Laplace exponent reaches the switching rate at kappa"
        )
    value = (
        model.q_plus / (model.q_plus - psi_p)
        * g_p
        * model.q_minus / (model.q_minus - psi_m)
        * g_m
    )
    return value - 1.0


def check_moment_condition(model: MapModel, kappa: float) -> tuple[bool, float]:
    """Search a dyadic bump epsilon with all transforms finite at kappa+eps.

    Success bounds the kappa-moment-with-log of the cycle weight, which
    is what the tail constants need beyond the root itself.
    """
    for k in range(1, 41):
        eps = 2.0**-k
        z = kappa + eps
        psi_p = model.levy_plus.psi(z)
        psi_m = model.levy_minus.psi(z)
        if psi_p is None or psi_m is None:
            continue
        if psi_p >= model.q_plus or psi_m >= model.q_minus:
            continue
        if model.u_plus.mgf(z) is None or model.u_minus.mgf(z) is None:
            continue
        return True, eps
    return False, 2.0**-40


@dataclass
class TailConstantFit:
    c: float
    ci: tuple[float, float]
    window: tuple[float, float]
    thresholds: np.ndarray
    values: np.ndarray
    non_plateau: bool

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "ci": list(self.ci),
            "window": list(self.window),
            "thresholds": self.thresholds.tolist(),
            "values": self.values.tolist(),
            "nonPlateau": self.non_plateau,
        }


def _window_values(values: np.ndarray, kappa: float, ts: np.ndarray) -> np.ndarray:
    srt = np.sort(values)
    surv = (srt.size - np.searchsorted(srt, ts, side="right")) / srt.size
    return ts**kappa * surv


def estimate_tail_constant(
    samples: SampleSet,
    kappa: float,
    window: tuple[float, float] = (1e-2, 1e-4),
    grid_points: int = 15,
    bootstrap_replicates: int = 200,
    level: float = 0.95,
    t_grid: np.ndarray | None = None,
) -> TailConstantFit:
    """Median of threshold^kappa * empirical survival over a quantile window.

    The window is expressed in survival levels so it transfers across
    models; pass ``t_grid`` to evaluate on externally chosen thresholds
    (e.g. to compare tails of different samples on one grid).  The
    confidence interval is a percentile bootstrap of the same statistic.
    A monotone drift of the fitted values across the window (log-log
    slope beyond 0.1) flags the fit as non-plateau.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    values = samples.values
    s_hi, s_lo = max(window), min(window)
    if t_grid is None:
        if values.size * s_lo < 10:
            raise WindowTooDeep(
                f"window depth {s_lo:g} needs >= {math.ceil(10 / s_lo)} samples, "
                f"have {values.size}"
            )
        t_lo = samples.quantile(1.0 - s_hi)
        t_hi = samples.quantile(1.0 - s_lo)
        if not (t_lo > 0 and t_hi > t_lo):
            raise WindowTooDeep("window thresholds must be positive and increasing")
        ts = np.geomspace(t_lo, t_hi, grid_points)
    else:
        ts = np.asarray(t_grid, dtype=float)
    vals = _window_values(values, kappa, ts)
    c = float(np.median(vals))

    ci = bootstrap_ci(
        lambda vs: float(np.median(_window_values(vs, kappa, ts))),
        samples,
        replicates=bootstrap_replicates,
        level=level,
    )
    pos = vals > 0
    non_plateau = False
    if pos.sum() >= 3:
        slope = np.polyfit(np.log(ts[pos]), np.log(vals[pos]), 1)[0]
        non_plateau = bool(abs(slope) > NON_PLATEAU_SLOPE)
    return TailConstantFit(
        c=c, ci=ci, window=(s_hi, s_lo), thresholds=ts, values=vals, non_plateau=non_plateau
    )


class MomentStability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


def moment_explosion_scan(samples: SampleSet, s_grid) -> list[dict]:
    """Empirical s-moments with a max-term-share stability diagnostic.

    A share of the largest term above 1/2 signals that the empirical
    moment is dominated by a single observation, the standard symptom of
    a divergent moment.  Requires positive samples.
    """
    values = samples.values
    if values.size == 0 or np.any(values <= 0):
        raise ValueError("moment scan needs positive samples")
    logs = np.log(values)
    out = []
    for s in np.asarray(s_grid, dtype=float):
        ls = s * logs
        lmax = float(ls.max())
        rel = np.exp(ls - lmax)
        ssum = float(rel.sum())
        share = 1.0 / ssum
        log_moment = lmax + math.log(ssum) - math.log(values.size)
        moment = math.exp(log_moment) if log_moment < 700 else math.inf
        out.append(
            {
                "s": float(s),
                "moment": moment,
                "maxTermShare": share,
                "verdict": (
                    MomentStability.UNSTABLE if share > 0.5 else MomentStability.STABLE
                ).value,
            }
        )
    return out


def lattice_guard(model: MapModel) -> bool:
    """True when the cycle weight is certainly non-lattice.

    Holds for every parametric family here once any diffusive part,
    nonzero drift (through the continuous switching clocks) or a
    density-carrying jump law is present; only the fully deterministic
    degenerate family fails it.  Family-specific, not a general test.
    """
    if model.levy_plus.gaussian_sigma > 0 or model.levy_minus.gaussian_sigma > 0:
        return True
    if model.levy_plus.drift != 0 or model.levy_minus.drift != 0:
        return True
    laws = [model.u_plus, model.u_minus]
    if model.levy_plus.cpp_rate > 0:
        laws.append(model.levy_plus.cpp_jump)
    if model.levy_minus.cpp_rate > 0:
        laws.append(model.levy_minus.cpp_jump)
    return any(law.has_density() for law in laws)


@dataclass
class CramerReport:
    kappa: float
    mean_one_residual: float
    moment_condition_ok: bool
    epsilon_used: float
    lattice_ok: bool
    c_a: TailConstantFit | None = None
    c_b_plus: TailConstantFit | None = None
    c_b_minus: TailConstantFit | None = None

    def to_dict(self) -> dict:
        out = {
            "kappa": self.kappa,
            "meanOneResidual": self.mean_one_residual,
            "momentConditionOk": self.moment_condition_ok,
            "epsilonUsed": self.epsilon_used,
            "latticeOk": self.lattice_ok,
        }
        if self.c_a is not None:
            out["cA"] = self.c_a.to_dict()
        if self.c_b_plus is not None:
            out["cBplus"] = self.c_b_plus.to_dict()
        if self.c_b_minus is not None:
            out["cBminus"] = self.c_b_minus.to_dict()
        return out


def build_cramer_report(
    model: MapModel,
    kappa: float,
    a_samples: SampleSet | None = None,
    b_samples: SampleSet | None = None,
    window: tuple[float, float] = (1e-2, 1e-4),
) -> CramerReport:
    """Assemble the full light-tail report around a found root.

    The signed functional's two tail constants are evaluated on the same
    threshold grid as the standard one, which keeps the constants
    comparable and preserves the pathwise domination ordering.
    """
    residual = verify_mean_one(model, kappa)
    ok, eps = check_moment_condition(model, kappa)
    report = CramerReport(
        kappa=kappa,
        mean_one_residual=residual,
        moment_condition_ok=ok,
        epsilon_used=eps,
        lattice_ok=lattice_guard(model),
    )
    if a_samples is not None and a_samples.count:
        fit_a = estimate_tail_constant(a_samples, kappa, window)
        report.c_a = fit_a
        if b_samples is not None and b_samples.count:
            report.c_b_plus = estimate_tail_constant(
                b_samples, kappa, window, t_grid=fit_a.thresholds
            )
            neg = SampleSet(
                -b_samples.values,
                label=b_samples.label + "-neg",
                model_hash=b_samples.model_hash,
                master_seed=b_samples.master_seed,
            )
            report.c_b_minus = estimate_tail_constant(
                neg, kappa, window, t_grid=fit_a.thresholds
            )
    return report
