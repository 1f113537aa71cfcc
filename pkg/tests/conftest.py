import numpy as np
import pytest

from mapfunc import (
    Deterministic,
    ExpNegative,
    ExpPositive,
    Gaussian,
    Laplace,
    LevyLaw,
    LogNormal,
    MapModel,
    ParetoPositive,
    SimConfig,
)

SEED = 20260810


def make_model(levy_plus=None, levy_minus=None, u_plus=None, u_minus=None, **kw):
    return MapModel(
        q_plus=kw.pop("q_plus", 1.0),
        q_minus=kw.pop("q_minus", 1.0),
        levy_plus=levy_plus or LevyLaw(),
        levy_minus=levy_minus or LevyLaw(),
        u_plus=u_plus or Deterministic(0.0),
        u_minus=u_minus or Deterministic(0.0),
        **kw,
    )


def drift_model(a_plus=-1.0, a_minus=None, **kw):
    a_minus = a_plus if a_minus is None else a_minus
    return make_model(LevyLaw(drift=a_plus), LevyLaw(drift=a_minus), **kw)


def dufresne_model(mu, sigma=1.0, **kw):
    bm = LevyLaw(drift=-mu, gaussian_sigma=sigma)
    return make_model(bm, bm, **kw)


def pareto_jump_model(alpha, scale=1.0, a=-1.0, **kw):
    return make_model(
        LevyLaw(drift=a),
        LevyLaw(drift=a),
        u_plus=ParetoPositive(index=alpha, scale=scale),
        **kw,
    )


def degenerate_model(c=1.0):
    return make_model(u_plus=Deterministic(c), u_minus=Deterministic(-c))


@pytest.fixture
def cfg():
    return SimConfig(master_seed=SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def zoo20() -> list[tuple[str, MapModel]]:
    """Twenty infinite-lifetime models spanning every law family."""
    return [
        ("drift-down", drift_model(-1.0)),
        ("drift-up", drift_model(0.5)),
        ("drift-mixed", drift_model(-0.2, 0.1)),
        ("drift-asym-q", drift_model(-1.0, q_plus=2.0, q_minus=0.5)),
        ("bm-zero-drift", dufresne_model(0.0, sigma=2.0)),
        ("bm-dufresne-075", dufresne_model(0.75)),
        ("bm-dufresne-150", dufresne_model(1.5)),
        ("degenerate", degenerate_model()),
        ("gauss-jumps", make_model(
            LevyLaw(drift=-1.0), LevyLaw(drift=-1.0),
            u_plus=Gaussian(mean=0.0, stdev=1.0), u_minus=Gaussian(mean=0.1, stdev=0.5))),
        ("laplace-jumps", make_model(
            LevyLaw(drift=-0.5), LevyLaw(drift=-0.5),
            u_plus=Laplace(rate=2.0), u_minus=Laplace(rate=3.0))),
        ("exp-jumps", make_model(
            LevyLaw(drift=-2.0), LevyLaw(drift=-2.0),
            u_plus=ExpPositive(rate=3.0), u_minus=ExpNegative(rate=4.0))),
        ("exp-jumps-negated", make_model(
            LevyLaw(drift=-1.0), LevyLaw(drift=-1.0),
            u_plus=ExpPositive(rate=3.0, negated=True),
            u_minus=ExpNegative(rate=4.0, negated=True))),
        ("cpp-exp", make_model(
            LevyLaw(cpp_rate=2.0, cpp_jump=ExpPositive(rate=5.0)),
            LevyLaw(cpp_rate=1.0, cpp_jump=ExpNegative(rate=2.0)))),
        ("cpp-gauss-mix", make_model(
            LevyLaw(drift=-0.5, gaussian_sigma=0.5, cpp_rate=1.0,
                    cpp_jump=Gaussian(mean=0.0, stdev=0.3)),
            LevyLaw(drift=-0.5))),
        ("pareto-heavy", pareto_jump_model(3.0)),
        ("pareto-2", pareto_jump_model(2.0)),
        ("pareto-negated", make_model(
            LevyLaw(drift=0.5), LevyLaw(drift=0.5),
            u_plus=ParetoPositive(index=2.0, scale=1.0, negated=True))),
        ("lognormal-jump", make_model(
            LevyLaw(drift=-2.0), LevyLaw(drift=-2.0),
            u_plus=LogNormal(log_mean=0.0, log_stdev=1.0))),
        ("pareto-infinite-mean", make_model(
            LevyLaw(drift=-1.0), LevyLaw(drift=-1.0),
            u_plus=ParetoPositive(index=0.5, scale=1.0))),
        ("undefined-k", make_model(
            u_plus=ParetoPositive(index=0.8, scale=1.0),
            u_minus=ParetoPositive(index=0.4, scale=1.0, negated=True))),
    ]
