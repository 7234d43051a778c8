"""Unconditional interval methods: Wald, exact (stagewise ordering), repeated,
adjusted asymptotic, parametric bootstrap, randomisation-based.

Stagewise ordering ranks a stage-1 rejection above every stage-2 outcome and,
within a stage, larger Z above smaller.  The resulting p-value function

    P(theta) = P_theta(outcome at least as extreme as observed)

is strictly increasing in theta; the exact CI solves P = alpha/2 and
P = 1 - alpha/2, the median unbiased estimate solves P = 1/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.special import log_ndtr, ndtr

from .numerics import (
    bvn_cdf,
    empirical_quantile,
    norm_pdf,
    norm_quantile,
)
from .trial import (
    CiMethod,
    CiResult,
    Design,
    InformationDecreaseError,
    TrialStatistics,
    ValidationError,
)

__all__ = [
    "PValueFn",
    "AdjustedMoments",
    "wald_ci",
    "stagewise_pvalue",
    "exact_ci",
    "repeated_ci",
    "adjusted_moments",
    "adjusted_asymptotic_ci",
    "parametric_bootstrap_ci",
    "randomisation_ci",
]

MIN_RESAMPLES = 1000


def _unpooled_se(trial: TrialStatistics, design: Design) -> float:
    """Wald standard error at the stopping stage (unpooled arm variances)."""
    d = trial.data
    if trial.stop_stage == 1:
        n_c, n_t = design.n1_ctrl, design.n1_trt
        s_c, s_t = d.s1_ctrl, d.s1_trt
    else:
        n_c, n_t = design.n2_ctrl, design.n2_trt
        s_c, s_t = d.s1_ctrl + d.s2_ctrl, d.s1_trt + d.s2_trt
    p_c, p_t = s_c / n_c, s_t / n_t
    return math.sqrt(p_t * (1.0 - p_t) / n_t + p_c * (1.0 - p_c) / n_c)


def wald_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Standard two-sided interval: theta_hat +- z * unpooled SE at stage T."""
    se = _unpooled_se(trial, design)
    z = norm_quantile(1.0 - design.alpha / 2.0)
    theta = trial.theta_hat
    flags = frozenset({"zero_variance"}) if se == 0.0 else frozenset()
    return CiResult(
        method=CiMethod.WALD,
        lower=theta - z * se,
        upper=theta + z * se,
        point=theta,
        flags=flags,
    )


def _pvalue_t2_arrays(theta, z2, info1, info2, e1) -> np.ndarray:
    """Stagewise p-value for stage-2 outcomes, vectorised.

    P(theta) = P(Z1 > e1) + P(Z1 <= e1, Z2 >= z2) under the canonical joint
    normal law with correlation sqrt(I1/I2).
    """
    theta = np.asarray(theta, float)
    r1, r2 = np.sqrt(info1), np.sqrt(info2)
    h = e1 - theta * r1
    k = z2 - theta * r2
    rho = np.clip(r1 / r2, 0.0, 1.0 - 1e-14)
    rect = np.clip(ndtr(h) - bvn_cdf(h, k, rho), 0.0, 1.0)
    return ndtr(-h) + rect


def stagewise_pvalue(theta: float, design: Design, trial: TrialStatistics) -> float:
    """P_theta(outcome at least as extreme as observed) under stagewise ordering."""
    if trial.stop_stage == 1:
        return float(ndtr(-(trial.stage1.z - theta * math.sqrt(trial.info1))))
    p = _pvalue_t2_arrays(theta, trial.stage2.z, trial.info1, trial.info2, design.e1)
    return float(np.clip(p, 0.0, 1.0))


@dataclass(frozen=True)
class PValueFn:
    """Stagewise p-value function of theta for an observed trial."""

    design: Design
    trial: TrialStatistics

    def __call__(self, theta: float) -> float:
        return stagewise_pvalue(theta, self.design, self.trial)


def exact_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Exact unconditional CI from the stagewise p-value; point is the MUE.

    Stage-1 stopping admits the closed form (z1 + Phi^-1(q)) / sqrt(I1) for
    both limits and the MUE; after continuing, the limits are roots of the
    p-value function over the parameter space [-1, 1].
    """
    alpha = design.alpha
    if trial.stop_stage == 1:
        r1 = math.sqrt(trial.info1)
        z1 = trial.stage1.z
        lower = (norm_quantile(alpha / 2.0) + z1) / r1
        upper = (norm_quantile(1.0 - alpha / 2.0) + z1) / r1
        return CiResult(CiMethod.EXACT, lower, upper, point=trial.theta_hat)
    if trial.info2 <= trial.info1:
        return CiResult(CiMethod.EXACT, math.nan, math.nan, flags=frozenset({"information_decrease"}))
    lower, upper, mue = _exact_ci_t2_arrays(
        np.array([trial.stage2.z]), trial.info1, trial.info2, design.e1, alpha, with_mue=True
    )
    return CiResult(CiMethod.EXACT, float(lower[0]), float(upper[0]), point=float(mue[0]))


def repeated_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Repeated CI: theta_hat +- e_T / sqrt(I_T); no associated point estimate.

    Consistent with the boundary decision by construction: the lower limit is
    positive exactly when Z_T exceeds e_T.
    """
    stats = trial.at_stop
    e_t = design.e1 if trial.stop_stage == 1 else design.e2
    half = e_t / math.sqrt(stats.info)
    return CiResult(CiMethod.REPEATED, stats.theta_hat - half, stats.theta_hat + half)


@dataclass(frozen=True)
class AdjustedMoments:
    """Mean and variance of the stopped-trial MLE under the normal model."""

    theta: float
    e_theta_hat: float
    var_theta_hat: float


def adjusted_moments(theta: float, design: Design, info1: float, info2: float) -> AdjustedMoments:
    """E_theta(theta_hat) and Var_theta(theta_hat) under the stopping rule.

    Closed forms from truncated-normal moments of Z1 and the conditional law
    of Z2 given Z1 <= e1 (correlation sqrt(I1/I2)); exact, no quadrature
    error.  Requires I2 > I1.
    """
    if info2 <= info1:
        raise InformationDecreaseError(f"I2 = {info2} <= I1 = {info1}")
    r1, r2 = math.sqrt(info1), math.sqrt(info2)
    rho = r1 / r2
    m1, m2 = theta * r1, theta * r2
    u = design.e1 - m1
    cdf_u = float(ndtr(u))
    sf_u = float(ndtr(-u))
    pdf_u = float(norm_pdf(u))

    ez1_stop = m1 * sf_u + pdf_u
    ez1sq_stop = (m1 * m1 + 1.0) * sf_u + (m1 + design.e1) * pdf_u
    ez2_cont = m2 * cdf_u - rho * pdf_u
    ez2sq_cont = (
        m2 * m2 * cdf_u
        - 2.0 * m2 * rho * pdf_u
        + rho * rho * (cdf_u - u * pdf_u)
        + (1.0 - rho * rho) * cdf_u
    )
    mean = ez1_stop / r1 + ez2_cont / r2
    second = ez1sq_stop / info1 + ez2sq_cont / info2
    return AdjustedMoments(theta=theta, e_theta_hat=mean, var_theta_hat=second - mean * mean)


def adjusted_asymptotic_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Asymptotic interval normalised on the realised information.

    The stopped score S_T = Z_T*sqrt(I_T) satisfies E(S_T) = theta*E(I_T) and
    Var(S_T - theta*I_T) = E(I_T) for any stopping rule on S (optional
    stopping), so the score-scale mean adjustment vanishes and standardising
    the score increment by the realised information gives

        theta_hat +- Phi^-1(1 - alpha/2) / sqrt(I_T),

    centred on the MLE.  At stage 1 this coincides with the exact CI's closed
    form.  Flagged (not computed) when the information decreased, where the
    moment validation behind the normalisation is unavailable.
    """
    if trial.stop_stage == 2 and trial.info2 <= trial.info1:
        return CiResult(
            CiMethod.ADJUSTED_ASYMPTOTIC, math.nan, math.nan,
            flags=frozenset({"information_decrease"}),
        )
    stats = trial.at_stop
    half = norm_quantile(1.0 - design.alpha / 2.0) / math.sqrt(stats.info)
    return CiResult(
        CiMethod.ADJUSTED_ASYMPTOTIC,
        stats.theta_hat - half,
        stats.theta_hat + half,
        point=stats.theta_hat,
    )


def _plugin_rates(trial: TrialStatistics, design: Design) -> tuple[float, float]:
    """End-of-trial response-rate estimates (stage-1 rates if stopped early)."""
    d = trial.data
    if trial.stop_stage == 1:
        return d.s1_ctrl / design.n1_ctrl, d.s1_trt / design.n1_trt
    return (
        (d.s1_ctrl + d.s2_ctrl) / design.n2_ctrl,
        (d.s1_trt + d.s2_trt) / design.n2_trt,
    )


def _bootstrap_mles(
    rng: np.random.Generator, design: Design, p_ctrl: float, p_trt: float, b: int
) -> np.ndarray:
    """Group sequential MLEs of ``b`` parametric replicas at the given rates.

    Degenerate replicas (pooled stage-1 rate 0 or 1) carry no evidence either
    way and are treated as continuing; their MLE enters as-is.
    """
    n1c, n1t = design.n1_ctrl, design.n1_trt
    s1c = rng.binomial(n1c, p_ctrl, b)
    s1t = rng.binomial(n1t, p_trt, b)
    pooled = (s1c + s1t) / (n1c + n1t)
    ok = (pooled > 0.0) & (pooled < 1.0)
    theta1 = s1t / n1t - s1c / n1c
    with np.errstate(divide="ignore", invalid="ignore"):
        info1 = 1.0 / (pooled * (1.0 - pooled) * (1.0 / n1c + 1.0 / n1t))
    z1 = np.where(ok, theta1 * np.sqrt(info1), 0.0)
    stop = z1 > design.e1
    s2c = s1c + rng.binomial(design.n2_ctrl_inc, p_ctrl, b)
    s2t = s1t + rng.binomial(design.n2_trt_inc, p_trt, b)
    theta2 = s2t / design.n2_trt - s2c / design.n2_ctrl
    return np.where(stop, theta1, theta2)


def parametric_bootstrap_ci(
    design: Design, trial: TrialStatistics, b: int, rng: np.random.Generator
) -> CiResult:
    """Percentile bootstrap of the group sequential MLE at the plug-in rates.

    Stage-1 replicas are drawn at the end-of-trial rate estimates, stopped at
    e1, continued binomially otherwise; the CI is the (alpha/2, 1-alpha/2)
    empirical quantile pair and the point estimate is the replica mean.
    Deterministic for a fixed generator state.
    """
    if b < MIN_RESAMPLES:
        raise ValidationError(f"bootstrap needs at least {MIN_RESAMPLES} replicas, got {b}")
    p_ctrl, p_trt = _plugin_rates(trial, design)
    mles = _bootstrap_mles(rng, design, p_ctrl, p_trt, b)
    alpha = design.alpha
    lower = empirical_quantile(mles, alpha / 2.0)
    upper = empirical_quantile(mles, 1.0 - alpha / 2.0)
    return CiResult(CiMethod.PARAMETRIC_BOOTSTRAP, lower, upper, point=float(mles.mean()))


def randomisation_ci(
    design: Design,
    trial: TrialStatistics,
    n_resamples: int,
    rng: np.random.Generator,
    include_observed: bool = False,
) -> CiResult:
    """Randomisation-test interval: re-run the sequential analysis over
    re-randomised treatment allocations with all patient outcomes held fixed.

    Allocations are independent within-stage permutations preserving the
    observed per-stage arm sizes, drawn as hypergeometric splits of the fixed
    success totals (the pooled counts, hence the informations, are invariant).
    An allocation is more extreme than the observed one iff it stops at stage
    1 when the trial did not, or reaches the same stage with a strictly larger
    Z statistic.  The adjusted p-value is the extreme fraction; the interval is

        Phi^-1(1 - p_adj)*se +- Phi^-1(1 - alpha/2)*se

    with se the unpooled Wald standard error of the observed data.  p_adj of 0
    (or 1) makes Phi^-1 infinite: flagged, no interval.  ``include_observed``
    counts the observed allocation as one extra extreme resample.
    """
    if n_resamples < MIN_RESAMPLES:
        raise ValidationError(f"randomisation needs at least {MIN_RESAMPLES} resamples, got {n_resamples}")
    d = trial.data
    n1c, n1t = design.n1_ctrl, design.n1_trt
    m1 = d.s1_ctrl + d.s1_trt
    s1t = rng.hypergeometric(m1, n1c + n1t - m1, n1t, n_resamples) if 0 < m1 < n1c + n1t else np.full(n_resamples, min(m1, n1t))
    s1c = m1 - s1t
    z1 = (s1t / n1t - s1c / n1c) * math.sqrt(trial.info1)
    stop = z1 > design.e1

    if trial.stop_stage == 1:
        extreme = stop & (z1 > trial.stage1.z)
    else:
        n2c_inc, n2t_inc = design.n2_ctrl_inc, design.n2_trt_inc
        m2 = d.s2_ctrl + d.s2_trt
        s2t = rng.hypergeometric(m2, n2c_inc + n2t_inc - m2, n2t_inc, n_resamples) if 0 < m2 < n2c_inc + n2t_inc else np.full(n_resamples, min(m2, n2t_inc))
        s2c = m2 - s2t
        z2 = ((s1t + s2t) / design.n2_trt - (s1c + s2c) / design.n2_ctrl) * math.sqrt(trial.info2)
        extreme = stop | (~stop & (z2 > trial.stage2.z))

    count = int(extreme.sum())
    total = n_resamples
    if include_observed:
        count += 1
        total += 1
    p_adj = count / total
    if p_adj <= 0.0 or p_adj >= 1.0:
        return CiResult(
            CiMethod.RANDOMISATION, math.nan, math.nan,
            flags=frozenset({"degenerate_adjusted_pvalue"}),
        )
    se = _unpooled_se(trial, design)
    point = norm_quantile(1.0 - p_adj) * se
    half = norm_quantile(1.0 - design.alpha / 2.0) * se
    return CiResult(CiMethod.RANDOMISATION, point - half, point + half, point=point)


def _exact_ci_t2_arrays(z2, info1, info2, e1, alpha, with_mue=False):
    """Vectorised exact-CI limits (and optionally the MUE) for stage-2 rows.

    Roots of the stagewise p-value over the physical parameter space [-1, 1].
    """
    from .conditional import _bounded_roots

    z2 = np.asarray(z2, float)

    def make(target):
        def f(t):
            return _pvalue_t2_arrays(t, z2, info1, info2, e1) - target

        return f

    lower = _bounded_roots(make(alpha / 2.0), z2.size)
    upper = _bounded_roots(make(1.0 - alpha / 2.0), z2.size)
    if not with_mue:
        return lower, upper
    return lower, upper, _bounded_roots(make(0.5), z2.size)


def _exact_ci_t1_arrays(z1, info1, alpha) -> tuple[np.ndarray, np.ndarray]:
    r1 = np.sqrt(info1)
    q = norm_quantile(1.0 - alpha / 2.0)
    return (z1 - q) / r1, (z1 + q) / r1


def _log_tail_t1(theta, z1, info1, e1) -> np.ndarray:
    """log P(Z1 >= z1 | Z1 > e1, theta), stable in the deep tails."""
    m1 = np.asarray(theta, float) * np.sqrt(info1)
    return log_ndtr(-(z1 - m1)) - log_ndtr(-(e1 - m1))
