import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from seqci import (
    BivariateSpec,
    MUSEC_DESIGN,
    PValueFn,
    RootProblem,
    bvn_cdf,
    bvn_rect,
    empirical_quantile,
    find_root,
    maximize_1d,
    norm_cdf,
    norm_pdf,
    norm_quantile,
)
from seqci.numerics import NoSignChangeError, bisect_monotone, hazard_lower, hazard_upper

MUSEC_RHO = math.sqrt(312.8215400 / 393.7008207)


def rect_quad_oracle(a, b, m1, m2, rho):
    """P(X1 <= a, X2 >= b): adaptive quadrature over Phi-conditioned slices."""
    s = math.sqrt(1.0 - rho * rho)
    f = lambda u: norm.pdf(u) * norm.sf((b - m2 - rho * u) / s)
    val, err = quad(f, a - m1 - 40.0, a - m1, epsabs=1e-13, limit=300)
    return val


def test_norm_wrappers():
    assert norm_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert norm_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert norm_cdf(norm_quantile(0.3)) == pytest.approx(0.3, abs=1e-10)
    assert norm_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-14)
    with pytest.raises(ValueError):
        norm_quantile(0.0)
    with pytest.raises(ValueError):
        norm_quantile(1.0)


def test_norm_cdf_accuracy():
    xs = np.array([-8.0, -3.2, -1.0, -0.1, 0.4, 2.5, 6.0])
    for x in xs:
        ref, _ = quad(norm.pdf, -40, x, epsabs=1e-14, limit=200)
        assert norm_cdf(x) == pytest.approx(ref, abs=1e-12)


def test_bvn_cdf_against_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(40):
        rho = float(rng.uniform(-0.99, 0.99))
        h, k = rng.normal(0, 2, 2)
        # P(X<=h, Y<=k) = P(X<=h) - P(X<=h, Y>=k)
        ref = norm.cdf(h) - rect_quad_oracle(h, k, 0.0, 0.0, rho)
        assert bvn_cdf(h, k, rho) == pytest.approx(ref, abs=1e-9)


def test_bvn_rect_independence():
    spec = BivariateSpec(0.0, 0.0, 0.0, ((-math.inf, 0.0), (-math.inf, 0.0)))
    assert bvn_rect(spec) == pytest.approx(0.25, abs=1e-12)


def test_bvn_rect_full_plane_musec_rho():
    spec = BivariateSpec(1.3, -0.4, MUSEC_RHO, ((-math.inf, math.inf), (-math.inf, math.inf)))
    assert bvn_rect(spec) == pytest.approx(1.0, abs=1e-12)


def test_bvn_rect_monte_carlo_oracle():
    rng = np.random.default_rng(42)
    n = 10_000_000
    rho = MUSEC_RHO
    m1, m2 = 0.7, -0.3
    x = rng.normal(m1, 1.0, n)
    y = m2 + rho * (x - m1) + math.sqrt(1 - rho * rho) * rng.normal(0.0, 1.0, n)
    rect = ((-1.0, 2.0), (-0.5, math.inf))
    hit = (x >= -1.0) & (x <= 2.0) & (y >= -0.5)
    p_hat = hit.mean()
    se = math.sqrt(p_hat * (1 - p_hat) / n)
    spec = BivariateSpec(m1, m2, rho, rect)
    assert abs(bvn_rect(spec) - p_hat) < 3 * se


def test_bvn_rect_monotone_and_additive():
    rho = 0.6
    small = BivariateSpec(0.0, 0.0, rho, ((-1.0, 1.0), (-1.0, 1.0)))
    large = BivariateSpec(0.0, 0.0, rho, ((-2.0, 2.0), (-2.0, 2.0)))
    assert bvn_rect(small) <= bvn_rect(large)
    # partition of the plane at x=0.3 sums to 1
    left = BivariateSpec(0.0, 0.0, rho, ((-math.inf, 0.3), (-math.inf, math.inf)))
    right = BivariateSpec(0.0, 0.0, rho, ((0.3, math.inf), (-math.inf, math.inf)))
    assert bvn_rect(left) + bvn_rect(right) == pytest.approx(1.0, abs=1e-7)


def test_bvn_rect_degenerate_rho_guard():
    # correlation outside the open interval is rejected at the spec level
    with pytest.raises(ValueError):
        BivariateSpec(0.0, 0.0, 1.0, ((-1.0, 1.0), (-1.0, 1.0)))
    # near-degenerate values stay accurate: comonotone limit
    val = bvn_cdf(0.5, 0.2, 1.0 - 1e-15)
    assert val == pytest.approx(norm.cdf(0.2), abs=1e-9)


def test_find_root_linear():
    assert find_root(RootProblem(lambda x: x - 0.3, -1.0, 1.0)) == pytest.approx(0.3, abs=1e-8)


def test_find_root_normal_cdf():
    assert find_root(RootProblem(lambda x: norm_cdf(x) - 0.5, -2.0, 2.0)) == pytest.approx(0.0, abs=1e-10)


def test_find_root_musec_pvalue_equation(musec_trial):
    # lower exact-CI limit solves P(theta) = 0.025
    pfn = PValueFn(MUSEC_DESIGN, musec_trial)
    root = find_root(RootProblem(lambda t: pfn(t) - 0.025, -0.3, 0.3))
    assert root == pytest.approx(0.034, abs=1e-3)


def test_find_root_expansion_and_failure():
    # root outside the initial bracket but within the expansion span
    got = find_root(RootProblem(lambda x: x - 0.9, -0.1, 0.1))
    assert got == pytest.approx(0.9, abs=1e-8)
    with pytest.raises(NoSignChangeError):
        find_root(RootProblem(lambda x: x - 100.0, -0.1, 0.1))


def test_find_root_deterministic():
    problem = RootProblem(lambda x: math.tanh(x) - 0.21, -2.0, 2.0)
    assert find_root(problem) == find_root(problem)


def test_maximize_1d():
    assert maximize_1d(lambda x: -((x - 0.2) ** 2), -1.0, 1.0) == pytest.approx(0.2, abs=1e-8)
    assert maximize_1d(lambda x: -(x ** 2), -1.0, 1.0) == pytest.approx(0.0, abs=1e-8)


def test_maximize_1d_musec_conditional_loglik(musec_trial):
    from seqci.conditional import conditional_log_likelihood

    ll = lambda t: conditional_log_likelihood(
        t, musec_trial.stage2.z, musec_trial.info2, MUSEC_DESIGN, musec_trial.info1, 2
    )
    assert maximize_1d(ll, -0.5, 0.8) == pytest.approx(0.191, abs=2e-3)


def test_empirical_quantile_examples():
    assert empirical_quantile([1, 2, 3, 4, 5], 0.5) == pytest.approx(3.0)
    assert empirical_quantile([1, 2], 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        empirical_quantile([], 0.5)
    with pytest.raises(ValueError):
        empirical_quantile([1.0], 1.5)


def test_empirical_quantile_large_normal_sample():
    rng = np.random.default_rng(3)
    sample = rng.normal(0.0, 1.0, 1_000_000)
    assert empirical_quantile(sample, 0.975) == pytest.approx(norm_quantile(0.975), abs=0.02)


def test_empirical_quantile_monotone_and_shift():
    rng = np.random.default_rng(4)
    sample = rng.normal(2.0, 3.0, 500)
    ps = np.linspace(0.0, 1.0, 21)
    qs = [empirical_quantile(sample, float(p)) for p in ps]
    assert all(b >= a for a, b in zip(qs, qs[1:]))
    shifted = [empirical_quantile(sample + 1.5, float(p)) for p in ps]
    for q, s in zip(qs, shifted):
        assert s == pytest.approx(q + 1.5, abs=1e-12)


def test_hazards_stable_and_consistent():
    cs = np.array([-1e6, -50.0, -3.0, 0.0, 3.0, 50.0, 1e6])
    hu = hazard_upper(cs)
    hl = hazard_lower(cs)
    assert np.all(np.isfinite(hu)) and np.all(hu >= 0)
    # strictly positive wherever the density itself is representable
    assert np.all(hazard_upper(np.array([-37.0, 0.0, 37.0])) > 0)
    assert np.allclose(hl, hazard_upper(-cs), rtol=0, atol=0)
    # against scipy in the safe range
    safe = np.array([-8.0, -1.0, 0.0, 1.0, 8.0])
    assert np.allclose(hazard_upper(safe), norm.pdf(safe) / norm.sf(safe), rtol=1e-12)


def test_bisect_monotone_vector():
    targets = np.array([0.1, -0.4, 0.75])
    f = lambda x: x - targets
    roots = bisect_monotone(f, np.full(3, -2.0), np.full(3, 2.0))
    assert np.allclose(roots, targets, atol=1e-10)
