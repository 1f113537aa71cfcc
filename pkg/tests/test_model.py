import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mapfunc import (
    Deterministic,
    ExpNegative,
    ExpPositive,
    Gaussian,
    Laplace,
    LevyLaw,
    LogNormal,
    ParetoPositive,
    TailClass,
    UNDEFINED,
    drift_K,
    is_degenerate,
    laplace_exponent,
    matrix_exponent,
    mgf,
    semigroup_entry,
)
from mapfunc.errors import KillingUnsupported
from mapfunc.model import leading_eigenvalue, transform_domain_sup
from mapfunc.sim import SimConfig, sample_state_at

from conftest import SEED, degenerate_model, drift_model, dufresne_model, make_model, zoo20


# ---------------------------------------------------------------------------
# mgf
# ---------------------------------------------------------------------------


def test_mgf_deterministic():
    assert mgf(Deterministic(0.5), 2.0) == pytest.approx(math.e, rel=1e-12)


def test_mgf_exact_one_at_zero():
    laws = [
        Deterministic(3.0),
        Gaussian(mean=1.0, stdev=2.0),
        ExpPositive(rate=3.0),
        ExpNegative(rate=0.5),
        Laplace(rate=2.0),
        ParetoPositive(index=0.5, scale=2.0),
        LogNormal(log_mean=1.0, log_stdev=0.7),
        ParetoPositive(index=2.0, scale=1.0, negated=True),
    ]
    for law in laws:
        assert mgf(law, 0.0) == 1.0


def test_mgf_exponential():
    assert mgf(ExpPositive(rate=3.0), 1.0) == pytest.approx(1.5, rel=1e-12)
    assert mgf(ExpPositive(rate=3.0), 3.0) is None
    assert mgf(ExpPositive(rate=3.0), 3.0 - 1e-12) is None  # pole margin


def test_mgf_pareto_absent_for_positive_argument():
    assert mgf(ParetoPositive(index=2.0, scale=1.0), 0.1) is None
    assert mgf(LogNormal(), 0.1) is None


def test_mgf_pareto_negative_argument_quadrature():
    law = ParetoPositive(index=2.0, scale=1.0)
    val = mgf(law, -1.0)
    # Independent check: E[exp(-X)] by direct sampling.
    rng = np.random.default_rng(0)
    mc = np.exp(-law.sample(rng, 200_000)).mean()
    assert val == pytest.approx(mc, abs=3e-3)


def test_mgf_negation_mirrors_argument():
    law = ExpPositive(rate=3.0)
    neg = ExpPositive(rate=3.0, negated=True)
    assert mgf(neg, -1.0) == pytest.approx(mgf(law, 1.0), rel=1e-12)
    assert mgf(neg, 1.0) == pytest.approx(mgf(law, -1.0), rel=1e-12)
    assert mgf(neg, -3.0) is None


@given(
    rate=st.floats(0.1, 50.0),
    z=st.floats(-30.0, 30.0),
)
@settings(max_examples=60, deadline=None)
def test_mgf_laplace_domain(rate, z):
    val = mgf(Laplace(rate=rate), z)
    if abs(z) >= rate - 1e-9:
        assert val is None
    else:
        assert val == pytest.approx(rate**2 / (rate**2 - z * z), rel=1e-12)


# ---------------------------------------------------------------------------
# Laplace exponent
# ---------------------------------------------------------------------------


def test_laplace_exponent_pure_drift():
    assert laplace_exponent(LevyLaw(drift=-1.0), 2.0) == -2.0


def test_laplace_exponent_brownian():
    mu = 0.7
    levy = LevyLaw(drift=-mu, gaussian_sigma=1.0)
    for z in (-1.0, 0.3, 2.0):
        assert laplace_exponent(levy, z) == pytest.approx(z * z / 2 - mu * z, rel=1e-12)


def test_laplace_exponent_compound_poisson():
    levy = LevyLaw(cpp_rate=2.0, cpp_jump=ExpPositive(rate=5.0))
    assert laplace_exponent(levy, 1.0) == pytest.approx(0.5, rel=1e-12)
    assert laplace_exponent(levy, 5.0) is None


def test_laplace_exponent_zero_is_exact():
    for _, m in zoo20():
        assert m.levy_plus.psi(0.0) == 0.0
        assert m.levy_minus.psi(0.0) == 0.0


# ---------------------------------------------------------------------------
# Matrix exponent
# ---------------------------------------------------------------------------


def test_matrix_exponent_at_zero_is_chain_generator():
    m = make_model(q_plus=1.3, q_minus=0.7)
    fz = matrix_exponent(m, 0.0)
    assert np.allclose(fz.entries, [[-1.3, 1.3], [0.7, -0.7]])
    assert abs(fz.leading) <= 1e-12
    assert fz.trailing == pytest.approx(-2.0, rel=1e-12)


def test_identical_regimes_reduce_to_single_exponent():
    mu = 0.6
    m = dufresne_model(mu)
    for z in (-1.0, 0.5, 1.7):
        lam = leading_eigenvalue(m, z)
        assert lam == pytest.approx(z * z / 2 - mu * z, abs=1e-12)


def test_pure_drift_eigenvalue():
    m = drift_model(-1.0)
    assert leading_eigenvalue(m, 1.0) == pytest.approx(-1.0, abs=1e-12)


def test_matrix_exponent_absent_when_transform_absent():
    m = make_model(u_plus=ParetoPositive(index=3.0, scale=1.0))
    assert matrix_exponent(m, 0.5) is None
    assert matrix_exponent(m, -0.5) is not None


def test_matrix_exponent_rejects_killing():
    m = make_model(killing=0.5)
    with pytest.raises(KillingUnsupported):
        matrix_exponent(m, 0.0)


def test_eigenvalues_satisfy_characteristic_polynomial():
    for name, m in zoo20():
        for z in (-0.5, 0.0, 0.2):
            fz = matrix_exponent(m, z)
            if fz is None:
                continue
            tr = fz.entries[0, 0] + fz.entries[1, 1]
            det = float(np.linalg.det(fz.entries))
            for lam in (fz.leading, fz.trailing):
                resid = lam * lam - tr * lam + det
                scale = max(1.0, lam * lam, abs(tr * lam), abs(det))
                assert abs(resid) <= 1e-10 * scale, name


def test_leading_eigenvalue_convex_on_grid():
    for name, m in zoo20():
        sup = transform_domain_sup(m)
        hi = min(1.5, 0.8 * sup) if math.isfinite(sup) else 1.5
        if hi <= 0:
            hi = 0.0
        grid = np.linspace(-1.5, hi, 25)
        vals = [leading_eigenvalue(m, float(z)) for z in grid]
        for i in range(len(grid) - 2):
            trio = vals[i : i + 3]
            if any(v is None for v in trio):
                continue
            assert trio[1] <= (trio[0] + trio[2]) / 2 + 1e-9, name


# ---------------------------------------------------------------------------
# Semigroup
# ---------------------------------------------------------------------------


def test_semigroup_identity_at_time_zero():
    m = make_model(q_plus=1.2, q_minus=0.4)
    assert semigroup_entry(m, 0.0, 0.3, "+", "+") == pytest.approx(1.0, abs=1e-12)
    assert semigroup_entry(m, 0.0, 0.3, "+", "-") == pytest.approx(0.0, abs=1e-12)


def test_semigroup_rows_converge_to_stationary():
    m = make_model(q_plus=2.0, q_minus=0.5)
    total = m.q_plus + m.q_minus
    expected = {"+": m.q_minus / total, "-": m.q_plus / total}
    for frm in ("+", "-"):
        for to in ("+", "-"):
            val = semigroup_entry(m, 50.0, 0.0, frm, to)
            assert val == pytest.approx(expected[to], abs=1e-10)


def test_semigroup_rows_sum_to_one_at_zero_argument():
    for name, m in zoo20():
        for t in (0.3, 2.0):
            for frm in ("+", "-"):
                s = semigroup_entry(m, t, 0.0, frm, "+") + semigroup_entry(m, t, 0.0, frm, "-")
                assert s == pytest.approx(1.0, abs=1e-10), name


def test_semigroup_matches_monte_carlo():
    m = make_model(
        LevyLaw(drift=0.2),
        LevyLaw(drift=-0.4, cpp_rate=1.0, cpp_jump=ExpNegative(rate=3.0)),
        u_plus=Gaussian(mean=0.0, stdev=0.5),
        u_minus=Deterministic(0.2),
    )
    cfg = SimConfig(master_seed=SEED)
    n = 200_000
    for t, z in ((0.7, 0.5), (1.4, -0.6)):
        xi, j_idx = sample_state_at(m, t, n, cfg, 5)
        vals = np.exp(z * xi)
        for j, jname in enumerate(("+", "-")):
            sel = vals * (j_idx == j)
            est = sel.mean()
            se = sel.std(ddof=1) / math.sqrt(n)
            ana = semigroup_entry(m, t, z, "+", jname)
            assert abs(est - ana) <= 3 * se, (t, z, jname)


# ---------------------------------------------------------------------------
# Long-run drift and degeneracy
# ---------------------------------------------------------------------------


def test_drift_k_by_direct_substitution():
    m = drift_model(-2.0, -1.0)
    assert drift_K(m) == pytest.approx(-1.5, rel=1e-12)


def test_drift_k_undefined_needs_both_tails_infinite():
    m = make_model(
        u_plus=ParetoPositive(index=0.5, scale=1.0),
        u_minus=ParetoPositive(index=0.5, scale=1.0, negated=True),
    )
    assert drift_K(m) is UNDEFINED
    only_pos = make_model(u_plus=ParetoPositive(index=0.5, scale=1.0))
    assert drift_K(only_pos) == math.inf
    only_neg = make_model(u_plus=ParetoPositive(index=0.5, scale=1.0, negated=True))
    assert drift_K(only_neg) == -math.inf


def test_drift_k_degenerate_is_zero():
    assert drift_K(degenerate_model()) == 0.0


def test_drift_k_matches_eigenvalue_slope():
    h = 1e-5
    for name, m in zoo20():
        k = drift_K(m)
        if k is UNDEFINED or not math.isfinite(k):
            continue
        right = leading_eigenvalue(m, h)
        left = leading_eigenvalue(m, -h)
        if right is not None and left is not None:
            fd = (right - left) / (2 * h)
        elif right is not None:
            fd = (right - leading_eigenvalue(m, 0.0)) / h
        elif left is not None:
            fd = (leading_eigenvalue(m, 0.0) - left) / h
        else:
            continue
        assert abs(fd - k) <= 1e-3 * (1 + abs(k)), name


def test_is_degenerate():
    assert is_degenerate(degenerate_model())
    assert not is_degenerate(dufresne_model(0.5))
    assert is_degenerate(drift_model(-1.0, killing=0.5))
    neg = make_model(
        u_plus=Deterministic(1.0), u_minus=Deterministic(1.0, negated=True)
    )
    assert is_degenerate(neg)


# ---------------------------------------------------------------------------
# Laws: tails, sampling, means
# ---------------------------------------------------------------------------


def test_tail_classes():
    assert ParetoPositive(index=2.0, scale=1.0).tail_class() is TailClass.STRONG_SUBEXP
    assert ParetoPositive(index=0.9, scale=1.0).tail_class() is TailClass.HEAVY_INFINITE_MEAN
    assert LogNormal().tail_class() is TailClass.STRONG_SUBEXP
    assert Gaussian().tail_class() is TailClass.LIGHT
    # Negation empties the right tail.
    assert ParetoPositive(index=2.0, scale=1.0, negated=True).right_tail_class() is TailClass.LIGHT


def test_pareto_survival_and_mean():
    law = ParetoPositive(index=2.0, scale=2.0)
    assert float(law.survival(0.0)) == 1.0
    assert float(law.survival(2.0)) == pytest.approx(0.25)
    assert law.mean_value() == pytest.approx(2.0)
    rng = np.random.default_rng(1)
    draws = law.sample(rng, 400_000)
    assert (draws >= 0).all()
    # survival of sampled values matches the analytic form
    assert np.mean(draws > 2.0) == pytest.approx(0.25, abs=0.005)


def test_mean_parts_negation_swaps_sides():
    law = ExpPositive(rate=2.0)
    assert law.mean_parts() == (0.5, 0.0)
    neg = ExpPositive(rate=2.0, negated=True)
    assert neg.mean_parts() == (0.0, 0.5)
    assert neg.mean_value() == -0.5


def test_model_hash_distinguishes_models():
    a = drift_model(-1.0)
    b = drift_model(-1.0 + 1e-9)
    assert a.model_hash() != b.model_hash()
    assert a.model_hash() == drift_model(-1.0).model_hash()
