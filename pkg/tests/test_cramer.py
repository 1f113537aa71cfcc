import math

import numpy as np
import pytest
from scipy import integrate

from mapfunc import (
    Deterministic,
    ExpPositive,
    Gaussian,
    LevyLaw,
    SimConfig,
)
from mapfunc.cramer import (
    RootStatus,
    build_cramer_report,
    check_moment_condition,
    estimate_tail_constant,
    find_cramer_root,
    lattice_guard,
    moment_explosion_scan,
    verify_mean_one,
)
from mapfunc.errors import PositiveDrift, SubcriticalityViolated, WindowTooDeep
from mapfunc.model import leading_eigenvalue
from mapfunc.rngstreams import stream
from mapfunc.sim import _xi_t2_values, sample_AB_batch
from mapfunc.stats import SampleSet

from conftest import (
    SEED,
    degenerate_model,
    drift_model,
    dufresne_model,
    make_model,
    pareto_jump_model,
)


def exact_pareto_samples(n, alpha=2.0, seed=0):
    rng = np.random.default_rng(seed)
    return SampleSet(rng.random(n) ** (-1.0 / alpha), master_seed=seed)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------


def test_root_brownian_closed_form():
    for mu in (0.75, 1.5):
        root = find_cramer_root(dufresne_model(mu))
        assert root == pytest.approx(2 * mu, abs=1e-10)


def test_root_none_for_pure_drift():
    assert find_cramer_root(drift_model(-1.0)) is RootStatus.NO_ROOT


def test_root_domain_too_small_for_heavy_jumps():
    assert find_cramer_root(pareto_jump_model(3.0)) is RootStatus.DOMAIN_TOO_SMALL


def test_root_requires_negative_drift():
    with pytest.raises(PositiveDrift):
        find_cramer_root(drift_model(0.5))


def test_root_matches_dense_scan_oracle():
    m = make_model(
        LevyLaw(drift=-1.0),
        LevyLaw(drift=-1.0),
        u_plus=Gaussian(mean=0.0, stdev=1.0),
        u_minus=Gaussian(mean=0.0, stdev=1.0),
    )
    root = find_cramer_root(m)
    assert isinstance(root, float)
    # Independent oracle: dense scan for the sign change of the leading
    # eigenvalue at resolution 1e-4.
    zs = np.arange(1e-4, 4.0, 1e-4)
    vals = np.array([leading_eigenvalue(m, z) for z in zs])
    crossings = np.flatnonzero((vals[:-1] < 0) & (vals[1:] >= 0))
    assert crossings.size == 1
    z_scan = zs[crossings[0]]
    assert abs(root - z_scan) <= 2e-4
    assert abs(leading_eigenvalue(m, root)) <= 1e-12


def test_root_residual_within_tolerance():
    for m in (dufresne_model(0.75), dufresne_model(1.5)):
        root = find_cramer_root(m, tol=1e-12)
        assert abs(leading_eigenvalue(m, root)) <= 1e-12


# ---------------------------------------------------------------------------
# mean-one identity
# ---------------------------------------------------------------------------


def test_mean_one_residual_tiny_at_root():
    m = dufresne_model(0.75)
    root = find_cramer_root(m)
    assert abs(verify_mean_one(m, root)) <= 1e-8


def test_mean_one_negative_below_root():
    m = dufresne_model(0.75)
    root = find_cramer_root(m)
    assert verify_mean_one(m, root / 2) < 0


def test_mean_one_monte_carlo_oracle():
    m = make_model(
        LevyLaw(drift=-1.0),
        LevyLaw(drift=-1.0),
        u_plus=Gaussian(mean=0.0, stdev=1.0),
        u_minus=Gaussian(mean=0.0, stdev=1.0),
    )
    kappa = find_cramer_root(m)
    rng = stream(SEED, 31)
    vals = np.exp(kappa * _xi_t2_values(m, 1_000_000, rng))
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) <= 3 * se


def test_mean_one_subcriticality_guard():
    m = dufresne_model(0.75)
    # Far beyond the root the regime exponent exceeds the switching rate.
    with pytest.raises(SubcriticalityViolated):
        verify_mean_one(m, 10.0)


# ---------------------------------------------------------------------------
# moment bump condition
# ---------------------------------------------------------------------------


def test_moment_condition_entire_transforms():
    m = make_model(
        LevyLaw(drift=-1.0),
        LevyLaw(drift=-1.0),
        u_plus=Gaussian(mean=0.0, stdev=1.0),
        u_minus=Gaussian(mean=0.0, stdev=1.0),
    )
    ok, eps = check_moment_condition(m, find_cramer_root(m))
    assert ok


def test_moment_condition_brownian_first_bump():
    m = dufresne_model(0.75)
    ok, eps = check_moment_condition(m, find_cramer_root(m))
    assert ok and eps == 0.5


def test_moment_condition_domain_edge_fails():
    theta = 2.0
    m = make_model(
        LevyLaw(drift=-1.0),
        LevyLaw(drift=-1.0),
        u_plus=ExpPositive(rate=theta),
    )
    ok, eps = check_moment_condition(m, theta - 1e-12)
    assert not ok
    assert eps == 2.0**-40


# ---------------------------------------------------------------------------
# tail constant
# ---------------------------------------------------------------------------


def test_tail_constant_exact_power_law():
    s = exact_pareto_samples(1_000_000, alpha=2.0, seed=4)
    fit = estimate_tail_constant(s, 2.0)
    assert fit.c == pytest.approx(1.0, rel=0.02)
    assert fit.ci[0] <= 1.0 <= fit.ci[1]
    assert not fit.non_plateau


def test_tail_constant_flags_misspecified_exponent():
    s = exact_pareto_samples(1_000_000, alpha=2.0, seed=4)
    fit = estimate_tail_constant(s, 2.5)
    assert fit.non_plateau


def test_tail_constant_window_guard():
    s = exact_pareto_samples(5_000, alpha=2.0)
    with pytest.raises(WindowTooDeep):
        estimate_tail_constant(s, 2.0, window=(1e-2, 1e-4))


def test_tail_constant_dufresne_quadrature_oracle():
    mu = 0.75
    kappa = 2 * mu
    cfg = SimConfig(master_seed=SEED, grid_step=5e-3)
    a, _, div, _ = sample_AB_batch(dufresne_model(mu), 200_000, cfg, threads=4)
    s = SampleSet(a[~div], master_seed=SEED)
    fit = estimate_tail_constant(s, kappa, window=(1e-2, 2e-4))
    # Oracle constant by direct numerical integration of the gamma density
    # over (0, 2/t) at the same thresholds.
    shape = 2 * mu

    def exact_surv(t):
        val, _ = integrate.quad(
            lambda g: g ** (shape - 1) * math.exp(-g) / math.gamma(shape), 0.0, 2.0 / t
        )
        return val

    oracle_vals = np.array([t**kappa * exact_surv(t) for t in fit.thresholds])
    oracle_c = float(np.median(oracle_vals))
    assert fit.c == pytest.approx(oracle_c, rel=0.10)


def test_report_tail_constants_ordered():
    cfg = SimConfig(master_seed=SEED, grid_step=5e-3)
    m = dufresne_model(0.75)
    a, b, div, _ = sample_AB_batch(m, 150_000, cfg, threads=4)
    kappa = find_cramer_root(m)
    a_s = SampleSet(a[~div], master_seed=SEED)
    b_s = SampleSet(b[~div], master_seed=SEED)
    rep = build_cramer_report(m, kappa, a_s, b_s, window=(1e-2, 2e-4))
    assert abs(rep.mean_one_residual) <= 1e-8
    assert rep.c_a.c >= rep.c_b_plus.c
    assert rep.c_a.c >= rep.c_b_minus.c
    assert rep.c_b_plus.c >= 0 and rep.c_b_minus.c >= 0


# ---------------------------------------------------------------------------
# moment explosion scan
# ---------------------------------------------------------------------------


def test_moment_scan_stable_below_unstable_far_above():
    s = exact_pareto_samples(1_000_000, alpha=2.0, seed=6)
    out = moment_explosion_scan(s, [1.0, 6.0])
    assert out[0]["verdict"] == "Stable"
    assert out[0]["moment"] == pytest.approx(2.0, rel=0.02)  # E X = alpha/(alpha-1)
    assert out[1]["verdict"] == "Unstable"


def test_moment_scan_share_monotone_in_s():
    s = exact_pareto_samples(200_000, alpha=2.0, seed=7)
    shares = [r["maxTermShare"] for r in moment_explosion_scan(s, [0.5, 1.5, 2.5, 4.0, 8.0])]
    assert all(a <= b + 1e-12 for a, b in zip(shares, shares[1:]))


def test_moment_scan_requires_positive_samples():
    with pytest.raises(ValueError):
        moment_explosion_scan(SampleSet(np.array([1.0, -2.0])), [1.0])


# ---------------------------------------------------------------------------
# lattice guard
# ---------------------------------------------------------------------------


def test_lattice_guard():
    assert lattice_guard(dufresne_model(0.5))
    assert not lattice_guard(degenerate_model())
    assert lattice_guard(drift_model(-1.0))  # continuous clocks + drift
    cpp_det = make_model(
        LevyLaw(cpp_rate=1.0, cpp_jump=Deterministic(1.0)),
        LevyLaw(),
        u_plus=Deterministic(1.0),
        u_minus=Deterministic(-1.0),
    )
    assert not lattice_guard(cpp_det)
