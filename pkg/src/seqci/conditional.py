"""Conditional interval methods: estimation given the realised stopping stage.

Conditioning on T corrects the selection induced by the stopping rule.  The
conditional log-likelihood is

    L_c(theta; z_t, t) = -1/2 (z_t - theta*sqrt(I_t))^2 - log P(T = t | theta)

whose score equations give the conditional MLE as a fixed point:

    T = 2:  theta_c = theta_hat + sqrt(I1) phi(c) / (I2 Phi(c)),
    T = 1:  theta_c = theta_hat - phi(c) / (sqrt(I1) (1 - Phi(c))),

with c = e1 - theta_c*sqrt(I1).  (The signs and denominators follow from the
likelihood; the correction is upward after continuing and downward after
stopping.)  Both are solved on the score, never by naive fixed-point
iteration, which diverges near the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .numerics import (
    bisect_monotone,
    bvn_cdf,
    empirical_quantile,
    hazard_lower,
    hazard_upper,
    maximize_1d,
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
from .unconditional import MIN_RESAMPLES, _plugin_rates

__all__ = [
    "ConditionalDensity",
    "PenalisedLikelihood",
    "RejectionStarvationError",
    "conditional_density",
    "conditional_tail",
    "exact_conditional_ci",
    "restricted_exact_conditional_ci",
    "conditional_mle",
    "conditional_likelihood_ci",
    "lambda_star",
    "penalised_likelihood_ci",
]


class RejectionStarvationError(RuntimeError):
    """Conditional bootstrap acceptance rate fell below the 1e-4 floor."""


ACCEPTANCE_FLOOR = 1e-4


# ---------------------------------------------------------------------------
# conditional density and tail probabilities
# ---------------------------------------------------------------------------

def conditional_density(
    theta_hat, theta: float, design: Design, info1: float, info2: float | None, stage: int
):
    """Density of the MLE given the stopping stage, f(theta_hat | theta, T).

    Stage 2: Phi((e1 - theta_hat*sqrt(I1)) / sqrt(1 - I1/I2)) *
             sqrt(I2) phi(sqrt(I2)(theta_hat - theta)) / Phi(e1 - theta*sqrt(I1)).
    Stage 1: the Z1 > e1 truncation of N(theta, 1/I1).
    Vectorised over ``theta_hat``.
    """
    th = np.asarray(theta_hat, float)
    r1 = math.sqrt(info1)
    if stage == 1:
        denom = float(ndtr(-(design.e1 - theta * r1)))
        dens = np.where(
            th * r1 > design.e1,
            r1 * norm_pdf(r1 * (th - theta)) / denom,
            0.0,
        )
    elif stage == 2:
        if info2 is None or info2 <= info1:
            raise InformationDecreaseError(f"I2 = {info2} <= I1 = {info1}")
        r2 = math.sqrt(info2)
        sel = ndtr((design.e1 - th * r1) / math.sqrt(1.0 - info1 / info2))
        dens = sel * r2 * norm_pdf(r2 * (th - theta)) / float(ndtr(design.e1 - theta * r1))
    else:
        raise ValidationError(f"stage must be 1 or 2, got {stage!r}")
    return float(dens) if dens.ndim == 0 else dens


@dataclass(frozen=True)
class ConditionalDensity:
    """f(theta_hat | theta, T) as a callable, for quadrature and plotting."""

    theta: float
    design: Design
    info1: float
    info2: float | None
    stage: int

    def __call__(self, theta_hat):
        return conditional_density(
            theta_hat, self.theta, self.design, self.info1, self.info2, self.stage
        )


def _tail_t2_arrays(theta, z2, info1, info2, e1) -> np.ndarray:
    """P(theta_hat >= observed | T=2, theta) = P(Z2>=z2, Z1<=e1)/P(Z1<=e1).

    For theta far above the boundary the conditioning event vanishes and the
    ratio tends to 1 (the conditional law escapes upwards); that limit is
    substituted where the denominator underflows.
    """
    theta = np.asarray(theta, float)
    r1, r2 = np.sqrt(info1), np.sqrt(info2)
    h = e1 - theta * r1
    k = z2 - theta * r2
    rho = np.clip(r1 / r2, 0.0, 1.0 - 1e-14)
    num = np.clip(ndtr(h) - bvn_cdf(h, k, rho), 0.0, 1.0)
    den = ndtr(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 1.0)
    return np.clip(np.where(h < -37.0, 1.0, ratio), 0.0, 1.0)


def conditional_tail(theta: float, design: Design, trial: TrialStatistics) -> float:
    """P_theta(theta_hat >= observed | T = t): the conditional tail probability.

    Strictly increasing in theta; the exact conditional CI inverts it.
    """
    if trial.stop_stage == 1:
        m1 = theta * math.sqrt(trial.info1)
        return float(np.exp(log_ndtr(-(trial.stage1.z - m1)) - log_ndtr(-(design.e1 - m1))))
    if trial.info2 <= trial.info1:
        raise InformationDecreaseError(f"I2 = {trial.info2} <= I1 = {trial.info1}")
    return float(_tail_t2_arrays(theta, trial.stage2.z, trial.info1, trial.info2, design.e1))


# ---------------------------------------------------------------------------
# exact conditional and restricted exact conditional CIs
# ---------------------------------------------------------------------------

THETA_MIN, THETA_MAX = -1.0, 1.0


def _clip_estimate(est, theta_hat):
    """Constrain likelihood estimates to the unimodal search bracket
    [theta_hat - 1, theta_hat + 1] intersected with the parameter space;
    near-boundary data push the conditional score root far below it."""
    lo = np.maximum(np.asarray(theta_hat, float) - 1.0, THETA_MIN)
    hi = np.minimum(np.asarray(theta_hat, float) + 1.0, THETA_MAX)
    return np.clip(est, lo, hi)


def _bounded_roots(f, size: int) -> np.ndarray:
    """Roots of an elementwise-increasing f over the physical parameter space
    [-1, 1] (theta is a difference of proportions); elements whose root falls
    outside clamp to the boundary, where the interval limit is taken."""
    lo = np.full(size, THETA_MIN)
    hi = np.full(size, THETA_MAX)
    f_lo = np.asarray(f(lo), float)
    f_hi = np.asarray(f(hi), float)
    root = bisect_monotone(f, lo, hi, iters=60, tol_x=1e-11)
    root = np.where(f_lo >= 0.0, THETA_MIN, root)
    root = np.where(f_hi <= 0.0, THETA_MAX, root)
    return root


def _cond_roots_t1(z1, info1, e1, alpha) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised lower/upper/median roots of the stage-1 conditional tail."""
    z1 = np.asarray(z1, float)
    info1 = np.asarray(info1, float)

    def make(target):
        log_target = math.log(target)

        def f(t):
            m1 = t * np.sqrt(info1)
            return (log_ndtr(-(z1 - m1)) - log_ndtr(-(e1 - m1))) - log_target

        return f

    out = [_bounded_roots(make(t), z1.size) for t in (alpha / 2.0, 1.0 - alpha / 2.0, 0.5)]
    return out[0], out[1], out[2]


def _cond_roots_t2(z2, info1, info2, e1, alpha) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z2 = np.asarray(z2, float)

    def make(target):
        def f(t):
            return _tail_t2_arrays(t, z2, info1, info2, e1) - target

        return f

    out = [_bounded_roots(make(t), z2.size) for t in (alpha / 2.0, 1.0 - alpha / 2.0, 0.5)]
    return out[0], out[1], out[2]


def exact_conditional_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Exact conditional CI: inverts the conditional tail at alpha/2 and
    1 - alpha/2; the point estimate is the conditional MUE (tail = 1/2)."""
    alpha = design.alpha
    if trial.stop_stage == 1:
        lo, hi, mid = _cond_roots_t1(
            np.array([trial.stage1.z]), np.array([trial.info1]), design.e1, alpha
        )
    else:
        if trial.info2 <= trial.info1:
            return CiResult(
                CiMethod.CONDITIONAL_EXACT, math.nan, math.nan,
                flags=frozenset({"information_decrease"}),
            )
        lo, hi, mid = _cond_roots_t2(
            np.array([trial.stage2.z]), trial.info1, trial.info2, design.e1, alpha
        )
    return CiResult(CiMethod.CONDITIONAL_EXACT, float(lo[0]), float(hi[0]), point=float(mid[0]))


def _restriction_bound(design: Design, info1: float, stage: int) -> float:
    """Stage-occurrence cap: theta values keeping P(T<=t) and P(T>=t) above alpha/2."""
    r1 = math.sqrt(info1)
    if stage == 2:
        return (design.e1 - norm_quantile(design.alpha / 2.0)) / r1
    return (design.e1 - norm_quantile(1.0 - design.alpha / 2.0)) / r1


def restricted_exact_conditional_ci(design: Design, trial: TrialStatistics) -> CiResult:
    """Exact conditional CI intersected with the stage-occurrence region.

    After continuing (T=2) the upper limit is capped at
    (e1 - Phi^-1(alpha/2))/sqrt(I1); after stopping (T=1) the lower limit is
    floored at (e1 - Phi^-1(1-alpha/2))/sqrt(I1).
    """
    base = exact_conditional_ci(design, trial)
    if base.failed:
        return CiResult(
            CiMethod.RESTRICTED_CONDITIONAL_EXACT, base.lower, base.upper, flags=base.flags
        )
    bound = _restriction_bound(design, trial.info1, trial.stop_stage)
    if trial.stop_stage == 2:
        lower, upper = base.lower, min(base.upper, bound)
    else:
        lower, upper = max(base.lower, bound), base.upper
    return CiResult(CiMethod.RESTRICTED_CONDITIONAL_EXACT, lower, upper, point=base.point)


# ---------------------------------------------------------------------------
# conditional MLE and the penalised stage-1 estimate
# ---------------------------------------------------------------------------

def _cond_mle_t2_vec(z2, rho, e1, tol=1e-11, max_iter=80) -> np.ndarray:
    """Newton solve of x = z2 + rho*phi(c)/Phi(c), c = e1 - rho*x, on the Z2
    scale (x = theta_c*sqrt(I2)).  The iteration map has derivative
    1 - rho^2*r(c)(c + r(c)) in (1-rho^2, 1], so Newton is globally stable."""
    z2 = np.asarray(z2, float)
    rho = np.asarray(rho, float)
    x = z2 + rho * hazard_lower(e1 - rho * z2)
    for _ in range(max_iter):
        c = e1 - rho * x
        hl = hazard_lower(c)
        f = x - z2 - rho * hl
        fp = 1.0 - rho * rho * hl * (c + hl)
        step = f / fp
        x -= step
        if np.max(np.abs(step)) < tol:
            break
    return x


class _Stage1Solver:
    """Solver for the stage-1 penalised score equation z1 - x = lam*r(e1 - x),
    r the upper hazard; lam = 1 gives the conditional MLE.

    In y = e1 - x the equation reads psi(y) = y - lam*r(y) = -(z1 - e1); psi
    is strictly increasing, so the root is unique.  A per-(e1, lam) table of
    y*(log s), s = z1 - e1, is interpolated and polished with safeguarded
    Newton steps; accuracy ~1e-10 on the x scale across the lattice range.
    """

    S_MIN = 1e-7
    S_MAX = 64.0
    GRID = 4096

    def __init__(self, e1: float, lam: float):
        self.e1 = e1
        self.lam = lam
        logs = np.linspace(math.log(self.S_MIN), math.log(self.S_MAX), self.GRID)
        s = np.exp(logs)
        lo = -s - 6.0
        hi = np.maximum(2.0 / s + 2.0, e1 + 6.0)
        f = lambda y: y - lam * hazard_upper(y) + s
        self._log_s = logs
        self._y = bisect_monotone(f, lo, hi, iters=100, tol_x=1e-13)

    def _polish(self, y: np.ndarray, s: np.ndarray, steps: int = 3) -> np.ndarray:
        lam = self.lam
        for _ in range(steps):
            r = hazard_upper(y)
            f = y - lam * r + s
            fp = 1.0 - lam * r * (r - y)
            y = y - f / np.maximum(fp, 1e-300)
        return y

    def solve_z(self, z1: np.ndarray) -> np.ndarray:
        """Root x of the score equation, on the Z1 scale (theta = x/sqrt(I1))."""
        z1 = np.asarray(z1, float)
        s = np.clip(z1 - self.e1, self.S_MIN, self.S_MAX)
        y0 = np.interp(np.log(s), self._log_s, self._y)
        y = self._polish(y0, s)
        return self.e1 - y


_SOLVER_CACHE: dict[tuple[float, float], _Stage1Solver] = {}


def _stage1_solver(e1: float, lam: float) -> _Stage1Solver:
    key = (round(e1, 12), round(lam, 12))
    solver = _SOLVER_CACHE.get(key)
    if solver is None:
        solver = _Stage1Solver(e1, lam)
        _SOLVER_CACHE[key] = solver
    return solver


def conditional_log_likelihood(
    theta: float, z_t: float, info_t: float, design: Design, info1: float, stage: int
) -> float:
    """L_c(theta; z_t, t): normal log-likelihood minus log stage probability."""
    m_t = theta * math.sqrt(info_t)
    c = design.e1 - theta * math.sqrt(info1)
    log_stage = log_ndtr(c) if stage == 2 else log_ndtr(-c)
    return -0.5 * (z_t - m_t) ** 2 - float(log_stage)


def conditional_mle(design: Design, trial: TrialStatistics, verify: bool = False) -> float:
    """Maximiser of the conditional log-likelihood given the stopping stage.

    Solved on the score equation; with ``verify`` the result is cross-checked
    against a direct bounded maximisation of L_c to 1e-6.
    """
    if trial.stop_stage == 2:
        rho = math.sqrt(trial.info1 / trial.info2)
        if rho >= 1.0:
            raise InformationDecreaseError(f"I2 = {trial.info2} <= I1 = {trial.info1}")
        x = _cond_mle_t2_vec(np.array([trial.stage2.z]), np.array([rho]), design.e1)
        est = float(x[0]) / math.sqrt(trial.info2)
        z_t, info_t = trial.stage2.z, trial.info2
    else:
        solver = _stage1_solver(design.e1, 1.0)
        est = float(solver.solve_z(np.array([trial.stage1.z]))[0]) / math.sqrt(trial.info1)
        z_t, info_t = trial.stage1.z, trial.info1
    theta_hat = trial.theta_hat
    lo_b = max(theta_hat - 1.0, THETA_MIN)
    hi_b = min(theta_hat + 1.0, THETA_MAX)
    est = min(max(est, lo_b), hi_b)

    if verify:
        ref = maximize_1d(
            lambda t: conditional_log_likelihood(
                t, z_t, info_t, design, trial.info1, trial.stop_stage
            ),
            lo_b,
            hi_b,
            tol=1e-9,
        )
        if abs(ref - est) > 1e-6:
            raise RuntimeError(f"conditional MLE {est} disagrees with argmax {ref}")
    return est


def lambda_star(design: Design) -> float:
    """Penalty weight making the penalised estimate vanish at the boundary
    datum (z1 = e1, T = 1).

    Outer bisection over lambda of the penalised estimate; the estimate is
    continuous and decreasing in lambda.  Depends only on e1 (the score at
    theta = 0 factors out sqrt(I1)); cached per design.  If no sign change
    exists on [0, 1] the nearer endpoint is returned (callers see the flag
    through ``penalised_likelihood_ci``).
    """
    return _lambda_star_cached(round(design.e1, 12))


_LAMBDA_CACHE: dict[float, float] = {}


def _lambda_star_cached(e1: float) -> float:
    lam = _LAMBDA_CACHE.get(e1)
    if lam is not None:
        return lam
    z_boundary = np.array([e1 + 1e-12])

    def estimate(lam_value: float) -> float:
        return float(_Stage1Solver(e1, lam_value).solve_z(z_boundary)[0])

    lo, hi = 0.0, 1.0
    est_lo, est_hi = estimate(lo), estimate(hi)
    if est_lo <= 0.0 or est_hi >= 0.0:
        lam = 0.0 if abs(est_lo) <= abs(est_hi) else 1.0
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if estimate(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
    _LAMBDA_CACHE[e1] = lam
    return lam


@dataclass(frozen=True)
class PenalisedLikelihood:
    """Penalised log-likelihood L_lam for stage-1 data; lam=0 recovers the
    unpenalised and lam=1 the conditional log-likelihood."""

    lam: float
    z1: float
    info1: float
    e1: float

    def __call__(self, theta: float) -> float:
        m1 = theta * math.sqrt(self.info1)
        return -0.5 * (self.z1 - m1) ** 2 - self.lam * float(log_ndtr(-(self.e1 - m1)))

    def estimate(self) -> float:
        solver = _stage1_solver(self.e1, self.lam)
        theta_hat = self.z1 / math.sqrt(self.info1)
        raw = float(solver.solve_z(np.array([self.z1]))[0]) / math.sqrt(self.info1)
        return float(_clip_estimate(raw, theta_hat))


# ---------------------------------------------------------------------------
# conditional bootstrap CIs
# ---------------------------------------------------------------------------

_STOP_MASK_CACHE: dict[tuple, np.ndarray] = {}


def _stage1_stop_mask(design: Design) -> np.ndarray:
    """Boolean lattice over (s1_ctrl, s1_trt): does the replicate stop at 1?

    Uses the same arithmetic as the trial generator (degenerate pooled rates
    continue by convention), so conditioning and generation agree exactly.
    """
    key = (design.n1_ctrl, design.n1_trt, design.e1)
    mask = _STOP_MASK_CACHE.get(key)
    if mask is None:
        n1c, n1t = design.n1_ctrl, design.n1_trt
        sc = np.arange(n1c + 1)[:, None]
        st = np.arange(n1t + 1)[None, :]
        pooled = (sc + st) / (n1c + n1t)
        ok = (pooled > 0.0) & (pooled < 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            info1 = 1.0 / (pooled * (1.0 - pooled) * (1.0 / n1c + 1.0 / n1t))
            z1 = (st / n1t - sc / n1c) * np.sqrt(info1)
        mask = np.where(ok, z1 > design.e1, False)
        _STOP_MASK_CACHE[key] = mask
    return mask


def _binom_pmf(k_max: int, p: float) -> np.ndarray:
    from scipy.stats import binom

    return binom.pmf(np.arange(k_max + 1), k_max, p)


def _rejection_sample_stage1(
    rng: np.random.Generator,
    design: Design,
    p_ctrl: float,
    p_trt: float,
    want_stop: bool,
    b: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Stage-1 count pairs conditioned on the stopping decision.

    Drawn by inverse-CDF sampling of the exact conditional lattice law (the
    distribution rejection resampling converges to), so the stage probability
    is available in closed form: below the 1e-4 floor the conditioning is
    declared starved, mirroring an unbounded regenerate-until-match loop.
    """
    n1c, n1t = design.n1_ctrl, design.n1_trt
    joint = np.outer(_binom_pmf(n1c, p_ctrl), _binom_pmf(n1t, p_trt))
    mask = _stage1_stop_mask(design)
    weights = np.where(mask == want_stop, joint, 0.0).ravel()
    mass = float(weights.sum())
    if mass < ACCEPTANCE_FLOOR:
        raise RejectionStarvationError(
            f"stage probability {mass:.3g} below floor {ACCEPTANCE_FLOOR}"
        )
    cdf = np.cumsum(weights)
    u = rng.random(b) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    s1c, s1t = np.divmod(idx, n1t + 1)
    return s1c.astype(np.int64), s1t.astype(np.int64)


def _conditional_estimates_t2(
    rng: np.random.Generator, design: Design, p_ctrl: float, p_trt: float, b: int
) -> np.ndarray:
    """Conditional MLEs of b stage-2-conditioned replicas (own informations)."""
    s1c, s1t = _rejection_sample_stage1(rng, design, p_ctrl, p_trt, want_stop=False, b=b)
    s2c = s1c + rng.binomial(design.n2_ctrl_inc, p_ctrl, b)
    s2t = s1t + rng.binomial(design.n2_trt_inc, p_trt, b)
    n1c, n1t, n2c, n2t = design.n1_ctrl, design.n1_trt, design.n2_ctrl, design.n2_trt
    pooled1 = (s1c + s1t) / (n1c + n1t)
    pooled2 = (s2c + s2t) / (n2c + n2t)
    with np.errstate(divide="ignore", invalid="ignore"):
        info1 = 1.0 / (pooled1 * (1.0 - pooled1) * (1.0 / n1c + 1.0 / n1t))
        info2 = 1.0 / (pooled2 * (1.0 - pooled2) * (1.0 / n2c + 1.0 / n2t))
    theta2 = s2t / n2t - s2c / n2c
    usable = np.isfinite(info1) & np.isfinite(info2) & (info2 > info1)
    # replicas without a conditional MLE (degenerate or info decrease) keep
    # the plain MLE, mirroring the unconditional bootstrap's as-is rule
    est = theta2.copy()
    if np.any(usable):
        with np.errstate(invalid="ignore"):
            z2 = theta2[usable] * np.sqrt(info2[usable])
            rho = np.sqrt(np.clip(info1[usable] / info2[usable], 0.0, 1.0))
        x = _cond_mle_t2_vec(z2, rho, design.e1)
        est[usable] = x / np.sqrt(info2[usable])
    return _clip_estimate(est, theta2)


def _stage1_bootstrap_estimates(
    rng: np.random.Generator, design: Design, p_ctrl: float, p_trt: float, b: int, lam: float
) -> np.ndarray:
    """Stage-1-conditioned replica estimates: lam=1 conditional, else penalised."""
    s1c, s1t = _rejection_sample_stage1(rng, design, p_ctrl, p_trt, want_stop=True, b=b)
    n1c, n1t = design.n1_ctrl, design.n1_trt
    pooled = (s1c + s1t) / (n1c + n1t)
    info1 = 1.0 / (pooled * (1.0 - pooled) * (1.0 / n1c + 1.0 / n1t))
    z1 = (s1t / n1t - s1c / n1c) * np.sqrt(info1)
    solver = _stage1_solver(design.e1, lam)
    return _clip_estimate(solver.solve_z(z1) / np.sqrt(info1), z1 / np.sqrt(info1))


def _bootstrap_quantile_ci(estimates: np.ndarray, alpha: float) -> tuple[float, float]:
    return (
        empirical_quantile(estimates, alpha / 2.0),
        empirical_quantile(estimates, 1.0 - alpha / 2.0),
    )


def conditional_likelihood_ci(
    design: Design, trial: TrialStatistics, b: int, rng: np.random.Generator
) -> CiResult:
    """Percentile bootstrap of the conditional MLE, with resampling rejected
    until each replica reproduces the observed stopping stage.

    The point estimate is the conditional MLE of the observed data.
    """
    if b < MIN_RESAMPLES:
        raise ValidationError(f"bootstrap needs at least {MIN_RESAMPLES} replicas, got {b}")
    if trial.stop_stage == 2 and trial.info2 <= trial.info1:
        return CiResult(
            CiMethod.CONDITIONAL_LIKELIHOOD, math.nan, math.nan,
            flags=frozenset({"information_decrease"}),
        )
    p_ctrl, p_trt = _plugin_rates(trial, design)
    try:
        if trial.stop_stage == 2:
            est = _conditional_estimates_t2(rng, design, p_ctrl, p_trt, b)
        else:
            est = _stage1_bootstrap_estimates(rng, design, p_ctrl, p_trt, b, lam=1.0)
    except RejectionStarvationError:
        return CiResult(
            CiMethod.CONDITIONAL_LIKELIHOOD, math.nan, math.nan,
            flags=frozenset({"rejection_starvation"}),
        )
    lower, upper = _bootstrap_quantile_ci(est, design.alpha)
    point = conditional_mle(design, trial)
    return CiResult(CiMethod.CONDITIONAL_LIKELIHOOD, lower, upper, point=point)


def penalised_likelihood_ci(
    design: Design, trial: TrialStatistics, b: int, rng: np.random.Generator
) -> CiResult:
    """Conditional bootstrap with the penalised stage-1 estimate.

    Identical to the conditional likelihood CI when the trial continued to
    stage 2.  After early stopping every replica satisfies z1 > e1, where the
    lambda* penalty keeps the estimate strictly positive, so the interval lies
    above zero and is consistent with the efficacy decision by construction.
    """
    if trial.stop_stage == 2:
        base = conditional_likelihood_ci(design, trial, b, rng)
        return CiResult(
            CiMethod.PENALISED_LIKELIHOOD, base.lower, base.upper,
            point=base.point, flags=base.flags,
        )
    if b < MIN_RESAMPLES:
        raise ValidationError(f"bootstrap needs at least {MIN_RESAMPLES} replicas, got {b}")
    p_ctrl, p_trt = _plugin_rates(trial, design)
    lam = lambda_star(design)
    try:
        est = _stage1_bootstrap_estimates(rng, design, p_ctrl, p_trt, b, lam=lam)
    except RejectionStarvationError:
        return CiResult(
            CiMethod.PENALISED_LIKELIHOOD, math.nan, math.nan,
            flags=frozenset({"rejection_starvation"}),
        )
    lower, upper = _bootstrap_quantile_ci(est, design.alpha)
    point = PenalisedLikelihood(lam, trial.stage1.z, trial.info1, design.e1).estimate()
    return CiResult(CiMethod.PENALISED_LIKELIHOOD, lower, upper, point=point)
