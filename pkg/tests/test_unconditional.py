import math

import numpy as np
import pytest
from scipy.stats import hypergeom, norm

from seqci import (
    CiMethod,
    Design,
    InformationDecreaseError,
    MUSEC_DATA,
    MUSEC_DESIGN,
    TrialData,
    adjusted_asymptotic_ci,
    adjusted_moments,
    analyze_trial,
    exact_ci,
    parametric_bootstrap_ci,
    randomisation_ci,
    repeated_ci,
    stagewise_pvalue,
    wald_ci,
)
from seqci.trial import ValidationError

from conftest import make_rng


def random_stage2_trial(rng, design=MUSEC_DESIGN):
    """A trial that continued to stage 2, rejection-sampled from binomials."""
    while True:
        p_c, p_t = rng.uniform(0.08, 0.45, 2)
        data = TrialData(
            s1_ctrl=int(rng.binomial(design.n1_ctrl, p_c)),
            s1_trt=int(rng.binomial(design.n1_trt, p_t)),
            s2_ctrl=int(rng.binomial(design.n2_ctrl_inc, p_c)),
            s2_trt=int(rng.binomial(design.n2_trt_inc, p_t)),
        )
        try:
            trial = analyze_trial(design, data)
        except ValidationError:
            continue
        if trial.info2 > trial.info1:
            return trial


# ---------------------------------------------------------------------------
# Wald
# ---------------------------------------------------------------------------

def test_wald_musec(musec_trial):
    res = wald_ci(MUSEC_DESIGN, musec_trial)
    assert res.point == pytest.approx(0.137, abs=5e-4)
    assert res.lower == pytest.approx(0.040, abs=5e-4)
    assert res.upper == pytest.approx(0.234, abs=5e-4)


def test_wald_symmetric_about_zero():
    design = Design(n1_ctrl=50, n1_trt=50, n2_ctrl=100, n2_trt=100, e1=2.8, e2=2.0)
    trial = analyze_trial(design, TrialData(s1_ctrl=20, s1_trt=20, s2_ctrl=15, s2_trt=15))
    res = wald_ci(design, trial)
    assert res.lower == pytest.approx(-res.upper, abs=1e-14)


def test_wald_stage1_derived_oracle():
    # stage-1 counts analysed as if stopped: direct arithmetic on the
    # unpooled-variance formula (the independent oracle, frozen)
    trial = analyze_trial(MUSEC_DESIGN, TrialData(s1_ctrl=5, s1_trt=40))
    p_c, p_t = 5 / 97, 40 / 101
    se = math.sqrt(p_t * (1 - p_t) / 101 + p_c * (1 - p_c) / 97)
    res = wald_ci(MUSEC_DESIGN, trial)
    theta = p_t - p_c
    z = norm.ppf(0.975)
    assert res.lower == pytest.approx(theta - z * se, abs=1e-12)
    assert res.upper == pytest.approx(theta + z * se, abs=1e-12)


# ---------------------------------------------------------------------------
# stagewise p-value and exact CI
# ---------------------------------------------------------------------------

def test_stagewise_pvalue_centering_t1():
    trial = analyze_trial(MUSEC_DESIGN, TrialData(s1_ctrl=5, s1_trt=40))
    theta_c = trial.stage1.z / math.sqrt(trial.info1)
    assert stagewise_pvalue(theta_c, MUSEC_DESIGN, trial) == pytest.approx(0.5, abs=1e-12)


def test_stagewise_pvalue_strictly_increasing():
    rng = np.random.default_rng(17)
    for _ in range(5):
        trial = random_stage2_trial(rng)
        grid = np.linspace(trial.theta_hat - 0.5, trial.theta_hat + 0.5, 100)
        vals = [stagewise_pvalue(float(t), MUSEC_DESIGN, trial) for t in grid]
        # nondecreasing everywhere; strictly increasing wherever the value is
        # representable away from the float saturation points 0 and 1
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        interior = [(a, b) for a, b in zip(vals, vals[1:]) if 1e-12 < a and b < 1 - 1e-12]
        assert interior and all(b > a for a, b in interior)


def test_stagewise_pvalue_monte_carlo_oracle(musec_trial):
    # simulate the stagewise-more-extreme event under the canonical joint law
    theta = 0.10
    n = 2_000_000
    rng = np.random.default_rng(99)
    i1, i2 = musec_trial.info1, musec_trial.info2
    rho = math.sqrt(i1 / i2)
    z1 = rng.normal(theta * math.sqrt(i1), 1.0, n)
    z2 = theta * math.sqrt(i2) + rho * (z1 - theta * math.sqrt(i1)) + math.sqrt(1 - rho**2) * rng.normal(0, 1, n)
    extreme = (z1 > MUSEC_DESIGN.e1) | ((z1 <= MUSEC_DESIGN.e1) & (z2 >= musec_trial.stage2.z))
    p_hat = extreme.mean()
    se = math.sqrt(p_hat * (1 - p_hat) / n)
    assert abs(stagewise_pvalue(theta, MUSEC_DESIGN, musec_trial) - p_hat) < 3 * se


def test_exact_ci_musec(musec_trial):
    res = exact_ci(MUSEC_DESIGN, musec_trial)
    assert res.point == pytest.approx(0.134, abs=5e-4)
    assert res.lower == pytest.approx(0.034, abs=5e-4)
    assert res.upper == pytest.approx(0.234, abs=5e-4)


def test_exact_ci_t1_closed_form_matches_roots():
    # closed-form stage-1 limits equal direct root solving of the p-value
    from seqci.numerics import RootProblem, find_root

    trial = analyze_trial(MUSEC_DESIGN, TrialData(s1_ctrl=8, s1_trt=38))
    assert trial.stop_stage == 1
    res = exact_ci(MUSEC_DESIGN, trial)
    for target, got in ((0.025, res.lower), (0.975, res.upper)):
        root = find_root(
            RootProblem(
                lambda t, tt=target: stagewise_pvalue(t, MUSEC_DESIGN, trial) - tt,
                trial.theta_hat - 0.4,
                trial.theta_hat + 0.4,
                tol_x=1e-12,
            )
        )
        assert got == pytest.approx(root, abs=1e-8)


def test_exact_ci_t1_boundary_consistency():
    # at z1 = e1 exactly, the lower limit is positive iff e1 > z_{0.975}
    r1 = math.sqrt(312.0)
    lower = (norm.ppf(0.025) + MUSEC_DESIGN.e1) / r1
    assert lower > 0  # e1 = 2.797 > 1.96


# ---------------------------------------------------------------------------
# repeated CI
# ---------------------------------------------------------------------------

def test_repeated_musec(musec_trial):
    res = repeated_ci(MUSEC_DESIGN, musec_trial)
    assert res.point is None
    assert res.lower == pytest.approx(0.037, abs=5e-4)
    assert res.upper == pytest.approx(0.237, abs=5e-4)


def test_repeated_consistency_by_construction():
    rng = np.random.default_rng(23)
    for _ in range(50):
        trial = random_stage2_trial(rng)
        res = repeated_ci(MUSEC_DESIGN, trial)
        z_t = trial.at_stop.z
        e_t = MUSEC_DESIGN.e1 if trial.stop_stage == 1 else MUSEC_DESIGN.e2
        assert (res.lower > 0) == (z_t > e_t)


def test_repeated_boundary_identity():
    trial = analyze_trial(MUSEC_DESIGN, TrialData(s1_ctrl=5, s1_trt=40))
    res = repeated_ci(MUSEC_DESIGN, trial)
    assert res.lower == pytest.approx(trial.theta_hat - MUSEC_DESIGN.e1 / math.sqrt(trial.info1), abs=1e-14)


# ---------------------------------------------------------------------------
# adjusted moments / adjusted asymptotic
# ---------------------------------------------------------------------------

def _mc_moments(theta, e1, i1, i2, n, seed):
    rng = np.random.default_rng(seed)
    r1, r2 = math.sqrt(i1), math.sqrt(i2)
    rho = r1 / r2
    z1 = rng.normal(theta * r1, 1.0, n)
    z2 = theta * r2 + rho * (z1 - theta * r1) + math.sqrt(1 - rho * rho) * rng.normal(0, 1, n)
    th = np.where(z1 > e1, z1 / r1, z2 / r2)
    return float(th.mean()), float(th.var()), th.std() / math.sqrt(n)


def test_adjusted_moments_match_monte_carlo(musec_trial):
    rng = np.random.default_rng(8)
    for k in range(4):
        theta = float(rng.uniform(-0.1, 0.3))
        i1 = float(rng.uniform(150, 350))
        i2 = i1 * float(rng.uniform(1.15, 1.6))
        mom = adjusted_moments(theta, MUSEC_DESIGN, i1, i2)
        mean_hat, var_hat, se_mean = _mc_moments(theta, MUSEC_DESIGN.e1, i1, i2, 2_000_000, 100 + k)
        assert abs(mom.e_theta_hat - mean_hat) < 3 * se_mean
        assert mom.var_theta_hat == pytest.approx(var_hat, rel=0.01)


def test_adjusted_moments_no_stopping_limit():
    big_e1 = Design(n1_ctrl=97, n1_trt=101, n2_ctrl=134, n2_trt=143, e1=50.0, e2=1.977)
    mom = adjusted_moments(0.137, big_e1, 312.82, 393.70)
    assert mom.e_theta_hat == pytest.approx(0.137, abs=1e-10)
    assert mom.var_theta_hat == pytest.approx(1 / 393.70, rel=1e-8)


def test_sqrt_info_mixture_identity(musec_trial):
    # E(sqrt(I_T)) is exactly the stop-probability mixture of the two stages
    theta = 0.137
    i1, i2 = musec_trial.info1, musec_trial.info2
    p1 = 1 - norm.cdf(MUSEC_DESIGN.e1 - theta * math.sqrt(i1))
    mixture = math.sqrt(i1) * p1 + math.sqrt(i2) * (1 - p1)
    rng = np.random.default_rng(55)
    z1 = rng.normal(theta * math.sqrt(i1), 1.0, 1_000_000)
    sqrt_info = np.where(z1 > MUSEC_DESIGN.e1, math.sqrt(i1), math.sqrt(i2))
    se = sqrt_info.std() / 1000.0
    assert abs(sqrt_info.mean() - mixture) < 3 * se


def test_adjusted_moments_information_decrease():
    with pytest.raises(InformationDecreaseError):
        adjusted_moments(0.1, MUSEC_DESIGN, 400.0, 380.0)


def test_adjusted_asymptotic_musec(musec_trial):
    res = adjusted_asymptotic_ci(MUSEC_DESIGN, musec_trial)
    assert res.point == pytest.approx(0.137, abs=2e-3)
    assert res.lower == pytest.approx(0.039, abs=2e-3)
    assert res.upper == pytest.approx(0.235, abs=2e-3)
    assert res.width == pytest.approx(0.196, abs=2e-3)


def test_adjusted_asymptotic_no_stopping_reduces_to_pooled_wald():
    big_e1 = Design(n1_ctrl=97, n1_trt=101, n2_ctrl=134, n2_trt=143, e1=50.0, e2=1.977)
    trial = analyze_trial(big_e1, MUSEC_DATA)
    res = adjusted_asymptotic_ci(big_e1, trial)
    half = norm.ppf(0.975) / math.sqrt(trial.info2)
    assert res.lower == pytest.approx(trial.theta_hat - half, abs=1e-12)
    assert res.upper == pytest.approx(trial.theta_hat + half, abs=1e-12)


# ---------------------------------------------------------------------------
# parametric bootstrap
# ---------------------------------------------------------------------------

def test_parametric_bootstrap_musec_table(musec_trial):
    res = parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 200_000, make_rng(0))
    assert res.point == pytest.approx(0.143, abs=3e-3)
    assert res.lower == pytest.approx(0.041, abs=5e-3)
    assert res.upper == pytest.approx(0.253, abs=5e-3)


def test_parametric_bootstrap_deterministic(musec_trial):
    a = parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 2000, make_rng(1))
    b = parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 2000, make_rng(1))
    assert (a.lower, a.upper, a.point) == (b.lower, b.upper, b.point)


def test_parametric_bootstrap_seed_invariance(musec_trial):
    # two large-B runs agree within Monte Carlo error
    a = parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 400_000, make_rng(2))
    b = parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 400_000, make_rng(3))
    assert a.lower == pytest.approx(b.lower, abs=1.5e-3)
    assert a.upper == pytest.approx(b.upper, abs=1.5e-3)


def test_parametric_bootstrap_centered_null():
    design = Design(n1_ctrl=400, n1_trt=400, n2_ctrl=800, n2_trt=800, e1=2.8, e2=2.0)
    data = TrialData(s1_ctrl=200, s1_trt=200, s2_ctrl=200, s2_trt=200)
    trial = analyze_trial(design, data)
    res = parametric_bootstrap_ci(design, trial, 50_000, make_rng(4))
    assert res.point == pytest.approx(0.0, abs=3e-3)
    assert res.lower == pytest.approx(-res.upper, abs=6e-3)


def test_parametric_bootstrap_requires_min_b(musec_trial):
    with pytest.raises(ValidationError):
        parametric_bootstrap_ci(MUSEC_DESIGN, musec_trial, 10, make_rng(5))


# ---------------------------------------------------------------------------
# randomisation CI
# ---------------------------------------------------------------------------

def exact_randomisation_p_adjusted():
    """Exact lattice value of the adjusted p-value for the bundled trial."""
    n1_c, n1_t = 97, 101
    m1 = 39
    k1 = np.arange(m1 + 1)
    w1 = hypergeom.pmf(k1, n1_c + n1_t, m1, n1_t)
    i1 = 312.8215400
    z1 = (k1 / n1_t - (m1 - k1) / n1_c) * math.sqrt(i1)
    stop = z1 > 2.797
    m2 = 24
    k2 = np.arange(m2 + 1)
    w2 = hypergeom.pmf(k2, 37 + 42, m2, 42)
    # stage-2 comparison reduces to cumulative treated successes > observed 42
    c_tot = k1[~stop][:, None] + k2[None, :]
    w_joint = np.outer(w1[~stop], w2)
    return float(w1[stop].sum() + w_joint[c_tot > 42].sum())


def test_randomisation_musec_against_exact_lattice(musec_trial):
    p_exact = exact_randomisation_p_adjusted()
    n = 400_000
    res = randomisation_ci(MUSEC_DESIGN, musec_trial, n, make_rng(6))
    p_from_point = 1 - norm.cdf(res.point / (res.width / (2 * norm.ppf(0.975))))
    se = math.sqrt(p_exact * (1 - p_exact) / n)
    assert abs(p_from_point - p_exact) < 4 * se
    # published case-study row
    assert res.point == pytest.approx(0.130, abs=5e-3)
    assert res.lower == pytest.approx(0.033, abs=5e-3)
    assert res.upper == pytest.approx(0.226, abs=5e-3)


def test_randomisation_deterministic(musec_trial):
    a = randomisation_ci(MUSEC_DESIGN, musec_trial, 5000, make_rng(7))
    b = randomisation_ci(MUSEC_DESIGN, musec_trial, 5000, make_rng(7))
    assert (a.lower, a.upper, a.point) == (b.lower, b.upper, b.point)


def test_randomisation_degenerate_p_flag():
    # an overwhelming stage-1 stop: no sampled permutation is more extreme
    design = MUSEC_DESIGN
    trial = analyze_trial(design, TrialData(s1_ctrl=0, s1_trt=39))
    res = randomisation_ci(design, trial, 2000, make_rng(8))
    assert "degenerate_adjusted_pvalue" in res.flags
    # force-including the observed allocation yields a finite interval
    res2 = randomisation_ci(design, trial, 2000, make_rng(8), include_observed=True)
    assert not res2.failed


def test_randomisation_identical_outcomes_degenerate_at_source():
    # literally identical outcomes make the pooled rate 0/1: the trial itself
    # is degenerate before any resampling can happen
    from seqci import DegenerateDataError

    design = Design(n1_ctrl=20, n1_trt=20, n2_ctrl=40, n2_trt=40, e1=2.8, e2=2.0)
    with pytest.raises(DegenerateDataError):
        analyze_trial(design, TrialData(s1_ctrl=20, s1_trt=20, s2_ctrl=20, s2_trt=20))


def test_randomisation_balanced_data_point_near_zero():
    design = Design(n1_ctrl=40, n1_trt=40, n2_ctrl=80, n2_trt=80, e1=2.8, e2=2.0)
    data = TrialData(s1_ctrl=20, s1_trt=20, s2_ctrl=20, s2_trt=20)
    trial = analyze_trial(design, data)
    res = randomisation_ci(design, trial, 100_000, make_rng(9))
    assert not res.failed
    assert abs(res.point) < 0.05
