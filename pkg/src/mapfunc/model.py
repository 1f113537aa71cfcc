"""Model types and analytic transforms.

A model has two regimes.  While the chain sits in a regime, the additive
log component follows that regime's jump diffusion (drift + Brownian part
+ compound Poisson jumps); at each switch an extra jump is applied.  This
module defines the parametric jump laws, the per-regime laws, the full
two-state model, and their analytic transforms:

* ``mgf``               -- moment generating function of a jump law,
* ``laplace_exponent``  -- Laplace exponent of a regime law,
* ``matrix_exponent``   -- the 2x2 matrix whose semigroup gives the
                           joint transform of (state, log level),
* ``drift_K``           -- the long-run drift of the log level per unit
                           time, possibly infinite or undefined,
* ``is_degenerate``     -- whether the log level stays bounded.

Transforms that do not exist at an argument are reported as ``None``
(absence is a value, not an error).  Infinite means propagate as IEEE
infinities; an undefined drift is the distinct ``UNDEFINED`` tag, never
NaN.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import KillingUnsupported

__all__ = [
    "TailClass",
    "JumpLaw",
    "Deterministic",
    "Gaussian",
    "ExpPositive",
    "ExpNegative",
    "Laplace",
    "ParetoPositive",
    "LogNormal",
    "LevyLaw",
    "MapModel",
    "MatrixExponent",
    "UNDEFINED",
    "mgf",
    "laplace_exponent",
    "matrix_exponent",
    "semigroup_entry",
    "drift_K",
    "is_degenerate",
    "PLUS",
    "MINUS",
    "STATES",
]

PLUS = "+"
MINUS = "-"
STATES = (PLUS, MINUS)

# Transforms are reported absent this close to a domain pole to avoid
# catastrophic cancellation right at the boundary.
POLE_MARGIN = 1e-9

_INF = math.inf


class _Undefined:
    """Tag for an undefined drift (both tail means infinite)."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover - repr only
        return "Undefined"


UNDEFINED = _Undefined()


class TailClass(enum.Enum):
    LIGHT = "light"
    STRONG_SUBEXP = "strong-subexponential"
    HEAVY_INFINITE_MEAN = "heavy-with-infinite-mean"


def other_state(state: str) -> str:
    return MINUS if state == PLUS else PLUS


# ---------------------------------------------------------------------------
# Jump laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpLaw:
    """Base class for parametric scalar jump distributions.

    Every law carries a ``negated`` flag: with it set, the law of ``-X``
    is used.  Transforms map ``z -> mgf(-z)`` and tails reflect, which
    makes e.g. a negative power-law tail expressible.
    """

    negated: bool = field(default=False, kw_only=True)

    # -- subclass hooks (unnegated semantics) -------------------------------

    def _mgf(self, z: float) -> float | None:
        raise NotImplementedError

    def _mean_parts(self) -> tuple[float, float]:
        """(E[X^+], E[X^-]) of the unnegated law, entries possibly inf."""
        raise NotImplementedError

    def _domain(self) -> tuple[float, float]:
        """Open interval of z where the unnegated mgf is finite."""
        raise NotImplementedError

    def _sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _survival(self, x: np.ndarray) -> np.ndarray:
        """P(X > x) of the unnegated law, vectorized."""
        raise NotImplementedError

    def _cdf(self, x: np.ndarray) -> np.ndarray:
        return 1.0 - self._survival(x)

    def _point_mass(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def tail_class(self) -> TailClass:
        """Analytic class of the law's heavy side (variant-determined)."""
        return TailClass.LIGHT

    @property
    def variant(self) -> str:
        return type(self).__name__

    # -- public surface (negation-aware) ------------------------------------

    def mgf(self, z: float) -> float | None:
        """E[exp(zX)] when finite, else None.  Exact 1 at z=0."""
        if z == 0.0:
            return 1.0
        return self._mgf(-z if self.negated else z)

    def mgf_domain(self) -> tuple[float, float]:
        lo, hi = self._domain()
        return (-hi, -lo) if self.negated else (lo, hi)

    def mean_parts(self) -> tuple[float, float]:
        p, m = self._mean_parts()
        return (m, p) if self.negated else (p, m)

    def mean_value(self) -> float:
        p, m = self.mean_parts()
        if math.isinf(p):
            return _INF  # callers rule out the doubly-infinite case first
        if math.isinf(m):
            return -_INF
        return p - m

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = self._sample(rng, size)
        return -out if self.negated else out

    def survival(self, x) -> np.ndarray:
        """P(X > x), vectorized and negation-aware."""
        x = np.asarray(x, dtype=float)
        if self.negated:
            # P(-X > x) = P(X < -x) = cdf(-x) minus any atom at -x.
            return self._cdf(-x) - self._point_mass(-x)
        return self._survival(x)

    def integrated_survival(self, x: float) -> float:
        """G(x) = integral of P(X > u) du over u in (x, inf)."""
        if self.right_tail_class() is TailClass.HEAVY_INFINITE_MEAN:
            return _INF
        if self.mean_parts()[0] == 0.0 and x >= 0.0:
            return 0.0
        # Generic quadrature; closed-form subclasses override.
        f = lambda u: float(self.survival(u))
        if x < 0:
            a, _ = integrate.quad(f, x, 0.0, limit=200)
            b, _ = integrate.quad(f, 0.0, _INF, limit=200)
            return a + b
        val, _ = integrate.quad(f, x, _INF, limit=200)
        return val

    def right_tail_class(self) -> TailClass:
        """Class of the right tail as oriented (negation collapses to light)."""
        if self.negated:
            return TailClass.LIGHT
        return self.tail_class()

    def has_density(self) -> bool:
        return True

    def is_zero(self) -> bool:
        return False

    def params(self) -> dict:
        d = dict(self.__dict__)
        d["variant"] = self.variant
        return d


@dataclass(frozen=True)
class Deterministic(JumpLaw):
    c: float = 0.0

    def _mgf(self, z):
        return math.exp(z * self.c)

    def _mean_parts(self):
        return (max(self.c, 0.0), max(-self.c, 0.0))

    def _domain(self):
        return (-_INF, _INF)

    def _sample(self, rng, size):
        return np.full(size, self.c)

    def _survival(self, x):
        return (np.asarray(x, dtype=float) < self.c).astype(float)

    def _point_mass(self, x):
        return (np.asarray(x, dtype=float) == self.c).astype(float)

    def integrated_survival(self, x):
        c = -self.c if self.negated else self.c
        return max(c - x, 0.0)

    def has_density(self):
        return False

    def is_zero(self):
        return self.c == 0.0


@dataclass(frozen=True)
class Gaussian(JumpLaw):
    mean: float = 0.0
    stdev: float = 1.0

    def __post_init__(self):
        if not self.stdev > 0:
            raise ValueError("Gaussian stdev must be > 0")

    def _mgf(self, z):
        return math.exp(z * self.mean + 0.5 * z * z * self.stdev**2)

    def _mean_parts(self):
        m, s = self.mean, self.stdev
        phi = math.exp(-0.5 * (m / s) ** 2) / math.sqrt(2 * math.pi)
        cdf = 0.5 * (1 + math.erf(m / (s * math.sqrt(2))))
        pos = m * cdf + s * phi
        return (pos, pos - m)

    def _domain(self):
        return (-_INF, _INF)

    def _sample(self, rng, size):
        return rng.normal(self.mean, self.stdev, size)

    def _survival(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.stdev
        return 0.5 * special.erfc(z / math.sqrt(2))


@dataclass(frozen=True)
class ExpPositive(JumpLaw):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("ExpPositive rate must be > 0")

    def _mgf(self, z):
        if z >= self.rate - POLE_MARGIN:
            return None
        return self.rate / (self.rate - z)

    def _mean_parts(self):
        return (1.0 / self.rate, 0.0)

    def _domain(self):
        return (-_INF, self.rate)

    def _sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def _survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def integrated_survival(self, x):
        if self.negated:
            return super().integrated_survival(x)
        if x >= 0:
            return math.exp(-self.rate * x) / self.rate
        return -x + 1.0 / self.rate


@dataclass(frozen=True)
class ExpNegative(JumpLaw):
    """Minus an exponential: support on the negative half line."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("ExpNegative rate must be > 0")

    def _mgf(self, z):
        if z <= -self.rate + POLE_MARGIN:
            return None
        return self.rate / (self.rate + z)

    def _mean_parts(self):
        return (0.0, 1.0 / self.rate)

    def _domain(self):
        return (-self.rate, _INF)

    def _sample(self, rng, size):
        return -rng.exponential(1.0 / self.rate, size)

    def _survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 0.0, -np.expm1(self.rate * np.minimum(x, 0.0)))


@dataclass(frozen=True)
class Laplace(JumpLaw):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Laplace rate must be > 0")

    def _mgf(self, z):
        if abs(z) >= self.rate - POLE_MARGIN:
            return None
        return self.rate**2 / (self.rate**2 - z * z)

    def _mean_parts(self):
        half = 0.5 / self.rate
        return (half, half)

    def _domain(self):
        return (-self.rate, self.rate)

    def _sample(self, rng, size):
        return rng.laplace(0.0, 1.0 / self.rate, size)

    def _survival(self, x):
        x = np.asarray(x, dtype=float)
        pos = 0.5 * np.exp(-self.rate * np.maximum(x, 0.0))
        neg = 1.0 - 0.5 * np.exp(self.rate * np.minimum(x, 0.0))
        return np.where(x >= 0, pos, neg)


@dataclass(frozen=True)
class ParetoPositive(JumpLaw):
    """Power-law tail on [0, inf): P(X > x) = (1 + x/scale)^(-index)."""

    index: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.index > 0:
            raise ValueError("ParetoPositive index must be > 0")
        if not self.scale > 0:
            raise ValueError("ParetoPositive scale must be > 0")

    def _mgf(self, z):
        if z > 0:
            return None  # no positive exponential moments
        # z < 0: finite; integrate by parts against the survival function.
        val, _ = integrate.quad(
            lambda u: math.exp(z * u) * (1 + u / self.scale) ** (-self.index),
            0.0,
            _INF,
            limit=200,
        )
        return 1.0 + z * val

    def _mean_parts(self):
        if self.index > 1:
            return (self.scale / (self.index - 1), 0.0)
        return (_INF, 0.0)

    def _domain(self):
        return (-_INF, 0.0)

    def _sample(self, rng, size):
        u = rng.random(size)
        return self.scale * (u ** (-1.0 / self.index) - 1.0)

    def _survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(
            x < 0, 1.0, (1.0 + np.maximum(x, 0.0) / self.scale) ** (-self.index)
        )

    def integrated_survival(self, x):
        if self.negated:
            return super().integrated_survival(x)
        if self.index <= 1:
            return _INF
        a, xm = self.index, self.scale
        g0 = xm / (a - 1)
        if x <= 0:
            return g0 - x
        return g0 * (1.0 + x / xm) ** (-(a - 1))

    def tail_class(self):
        if self.index > 1:
            return TailClass.STRONG_SUBEXP
        return TailClass.HEAVY_INFINITE_MEAN


@dataclass(frozen=True)
class LogNormal(JumpLaw):
    log_mean: float = 0.0
    log_stdev: float = 1.0

    def __post_init__(self):
        if not self.log_stdev > 0:
            raise ValueError("LogNormal log_stdev must be > 0")

    def _mgf(self, z):
        if z > 0:
            return None
        m, s = self.log_mean, self.log_stdev

        def integrand(u):
            return math.exp(z * u - 0.5 * ((math.log(u) - m) / s) ** 2) / (
                u * s * math.sqrt(2 * math.pi)
            )

        val, _ = integrate.quad(integrand, 0.0, _INF, limit=200)
        return val

    def _mean_parts(self):
        return (math.exp(self.log_mean + 0.5 * self.log_stdev**2), 0.0)

    def _domain(self):
        return (-_INF, 0.0)

    def _sample(self, rng, size):
        return rng.lognormal(self.log_mean, self.log_stdev, size)

    def _survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.log_mean) / self.log_stdev
        return np.where(x > 0, 0.5 * special.erfc(z / math.sqrt(2)), 1.0)

    def tail_class(self):
        return TailClass.STRONG_SUBEXP


# ---------------------------------------------------------------------------
# Regime laws and the two-state model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyLaw:
    """One regime's log-level dynamics: drift + Brownian part + compound
    Poisson jumps.

    The Laplace exponent is
    ``psi(z) = drift*z + (gaussian_sigma*z)**2/2 + cpp_rate*(M(z) - 1)``
    wherever the jump transform ``M`` is finite, with ``psi(0) = 0``
    exactly.
    """

    drift: float = 0.0
    gaussian_sigma: float = 0.0
    cpp_rate: float = 0.0
    cpp_jump: JumpLaw = Deterministic(0.0)

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be >= 0")
        if self.cpp_rate < 0:
            raise ValueError("cpp_rate must be >= 0")

    def psi(self, z: float) -> float | None:
        if z == 0.0:
            return 0.0
        out = self.drift * z + 0.5 * (self.gaussian_sigma * z) ** 2
        if self.cpp_rate > 0:
            m = self.cpp_jump.mgf(z)
            if m is None:
                return None
            out += self.cpp_rate * (m - 1.0)
        return out

    def mgf_domain(self) -> tuple[float, float]:
        if self.cpp_rate > 0:
            return self.cpp_jump.mgf_domain()
        return (-_INF, _INF)

    def mean_rate(self) -> float:
        """E[xi_1] = drift + cpp_rate * E[jump] (possibly +-inf)."""
        if self.cpp_rate == 0:
            return self.drift
        return self.drift + self.cpp_rate * self.cpp_jump.mean_value()

    def jump_mean_parts(self) -> tuple[float, float]:
        if self.cpp_rate == 0:
            return (0.0, 0.0)
        return self.cpp_jump.mean_parts()

    def is_zero(self) -> bool:
        return (
            self.drift == 0.0
            and self.gaussian_sigma == 0.0
            and (self.cpp_rate == 0.0 or self.cpp_jump.is_zero())
        )

    def params(self) -> dict:
        return {
            "drift": self.drift,
            "gaussianSigma": self.gaussian_sigma,
            "cppRate": self.cpp_rate,
            "cppJump": self.cpp_jump.params(),
        }


@dataclass(frozen=True)
class MapModel:
    """Validated two-state model; immutable after construction.

    ``q_plus``/``q_minus`` are the switching rates out of each state,
    ``killing`` the lifetime rate (0 for infinite lifetime), ``u_plus``/
    ``u_minus`` the jumps applied when leaving each state.
    """

    q_plus: float
    q_minus: float
    levy_plus: LevyLaw
    levy_minus: LevyLaw
    u_plus: JumpLaw
    u_minus: JumpLaw
    killing: float = 0.0
    start_state: str = PLUS
    start_value: float = 1.0

    def __post_init__(self):
        if not (self.q_plus > 0 and self.q_minus > 0):
            raise ValueError("switching rates must be > 0")
        if self.killing < 0:
            raise ValueError("killing rate must be >= 0")
        if self.start_state not in STATES:
            raise ValueError("start_state must be '+' or '-'")
        if self.start_value == 0:
            raise ValueError("start_value must be nonzero")

    # -- per-state accessors -------------------------------------------------

    def rate(self, state: str) -> float:
        return self.q_plus if state == PLUS else self.q_minus

    def levy(self, state: str) -> LevyLaw:
        return self.levy_plus if state == PLUS else self.levy_minus

    def switch_jump(self, state: str) -> JumpLaw:
        """Jump applied when leaving ``state``."""
        return self.u_plus if state == PLUS else self.u_minus

    def mean_cycle_time(self) -> float:
        return 1.0 / self.q_plus + 1.0 / self.q_minus

    def params(self) -> dict:
        return {
            "qPlus": self.q_plus,
            "qMinus": self.q_minus,
            "killing": self.killing,
            "levyPlus": self.levy_plus.params(),
            "levyMinus": self.levy_minus.params(),
            "uPlus": self.u_plus.params(),
            "uMinus": self.u_minus.params(),
            "startState": self.start_state,
            "startValue": self.start_value,
        }

    def model_hash(self) -> str:
        blob = json.dumps(self.params(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class MatrixExponent:
    """F(z) with its two (real) eigenvalues, leading >= trailing."""

    z: float
    entries: np.ndarray
    leading: float
    trailing: float


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def mgf(law: JumpLaw, z: float) -> float | None:
    """E[exp(zX)] for a jump law when finite, else None."""
    return law.mgf(z)


def laplace_exponent(levy: LevyLaw, z: float) -> float | None:
    """log E[exp(z xi_1)] for a regime law when finite, else None."""
    return levy.psi(z)


def matrix_exponent(model: MapModel, z: float) -> MatrixExponent | None:
    """F(z) when all transforms exist at z; None otherwise.

    Eigenvalues come from the closed 2x2 quadratic; the discriminant
    ``((A-D)/2)**2 + BC`` is nonnegative because the off-diagonal product
    BC is positive wherever the switch-jump transforms are finite.
    """
    if model.killing > 0:
        raise KillingUnsupported("matrix exponent requires killing rate 0")
    psi_p = model.levy_plus.psi(z)
    psi_m = model.levy_minus.psi(z)
    g_p = model.u_plus.mgf(z)
    g_m = model.u_minus.mgf(z)
    if psi_p is None or psi_m is None or g_p is None or g_m is None:
        return None
    a = psi_p - model.q_plus
    d = psi_m - model.q_minus
    b = model.q_plus * g_p
    c = model.q_minus * g_m
    half_tr = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    s = math.sqrt(disc) if disc > 0 else 0.0
    entries = np.array([[a, b], [c, d]], dtype=float)
    return MatrixExponent(z=z, entries=entries, leading=half_tr + s, trailing=half_tr - s)


def leading_eigenvalue(model: MapModel, z: float) -> float | None:
    fz = matrix_exponent(model, z)
    return None if fz is None else fz.leading


def transform_domain_sup(model: MapModel) -> float:
    """Upper end of the z-interval where F(z) exists."""
    return min(
        model.levy_plus.mgf_domain()[1],
        model.levy_minus.mgf_domain()[1],
        model.u_plus.mgf_domain()[1],
        model.u_minus.mgf_domain()[1],
    )


def semigroup_entry(model: MapModel, t: float, z: float, frm: str, to: str) -> float | None:
    """Entry (frm, to) of exp(t F(z)), the joint transform of the state and
    the log level at time t given the start state."""
    if t < 0:
        raise ValueError("t must be >= 0")
    fz = matrix_exponent(model, z)
    if fz is None:
        return None
    i = STATES.index(frm)
    j = STATES.index(to)
    lam, mu = fz.leading, fz.trailing
    f = fz.entries
    eye = np.eye(2)
    if lam - mu > 1e-12 * max(1.0, abs(lam), abs(mu)):
        mat = (math.exp(lam * t) * (f - mu * eye) - math.exp(mu * t) * (f - lam * eye)) / (
            lam - mu
        )
    else:
        # Defective/near-defective pair: (F - lam I) is nilpotent for a 2x2.
        mat = math.exp(lam * t) * (eye + t * (f - lam * eye))
    return float(mat[i, j])


def drift_K(model: MapModel):
    """Long-run drift of the log level per unit time.

    Returns a float (possibly +-inf), or UNDEFINED when both the positive
    and the negative part of the per-cycle increment have infinite mean.
    The value is the cycle-mean increment over the mean cycle duration,
    computed from component means.
    """
    contributions = [
        model.levy_plus.jump_mean_parts(),
        model.levy_minus.jump_mean_parts(),
        model.u_plus.mean_parts(),
        model.u_minus.mean_parts(),
    ]
    pos_inf = any(math.isinf(p) for p, _ in contributions)
    neg_inf = any(math.isinf(m) for _, m in contributions)
    if pos_inf and neg_inf:
        return UNDEFINED
    if pos_inf:
        return _INF
    if neg_inf:
        return -_INF
    num = (
        model.levy_plus.mean_rate() / model.q_plus
        + model.u_plus.mean_value()
        + model.levy_minus.mean_rate() / model.q_minus
        + model.u_minus.mean_value()
    )
    return num / model.mean_cycle_time()


def mean_cycle_increment(model: MapModel) -> float:
    """Mean per-cycle log-level increment (K times the mean cycle time)."""
    k = drift_K(model)
    if k is UNDEFINED:
        return math.nan
    return k * model.mean_cycle_time()


def is_degenerate(model: MapModel) -> bool:
    """True when the log level stays bounded: finite lifetime, or both
    regimes trivial with opposite deterministic switch jumps."""
    if model.killing > 0:
        return True
    if not (model.levy_plus.is_zero() and model.levy_minus.is_zero()):
        return False
    up, um = model.u_plus, model.u_minus
    if not (isinstance(up, Deterministic) and isinstance(um, Deterministic)):
        return False
    cp = -up.c if up.negated else up.c
    cm = -um.c if um.negated else um.c
    return cp == -cm


def scan_leading_eigenvalue(model: MapModel, z_grid) -> list[tuple[float, float | None]]:
    """(z, leading eigenvalue or None) over a grid; for reports and scans."""
    return [(float(z), leading_eigenvalue(model, float(z))) for z in np.asarray(z_grid)]
