"""Scalar/vector numeric kernel: normal distribution, bivariate normal
rectangles, bracketed root finding, bounded maximisation, empirical quantiles.

The bivariate normal CDF uses Owen's T function (Owen 1956), which is exact to
~1e-14 and vectorises; a slice-quadrature oracle for it lives in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, ndtr, ndtri, owens_t

__all__ = [
    "norm_cdf",
    "norm_pdf",
    "norm_quantile",
    "BivariateSpec",
    "bvn_cdf",
    "bvn_rect",
    "RootProblem",
    "NoSignChangeError",
    "MaxIterationsError",
    "find_root",
    "maximize_1d",
    "empirical_quantile",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def norm_cdf(x):
    """Standard normal CDF (vectorised)."""
    return ndtr(x)


def norm_pdf(x):
    """Standard normal density (vectorised)."""
    return np.exp(-0.5 * np.square(x) - _LOG_SQRT_2PI)


def norm_quantile(p):
    """Inverse standard normal CDF; domain error outside (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise ValueError(f"quantile probability must lie in (0, 1), got {p!r}")
    out = ndtri(p_arr)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


_HAZARD_ASYMPTOTIC = 1e4


def hazard_upper(c):
    """phi(c) / (1 - Phi(c)), numerically stable for any c.

    Beyond |c| ~ 1e4 the log-space form cancels catastrophically; the Mills
    series c + 1/c - 2/c^3 is exact to ~1e-19 relative there.
    """
    c = np.asarray(c, dtype=float)
    cc = np.clip(c, -_HAZARD_ASYMPTOTIC, _HAZARD_ASYMPTOTIC)
    direct = np.exp(-0.5 * cc * cc - _LOG_SQRT_2PI - log_ndtr(-cc))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        series = c + 1.0 / c - 2.0 / np.clip(c, -1e100, 1e100) ** 3
    return np.where(c > _HAZARD_ASYMPTOTIC, series, direct)


def hazard_lower(c):
    """phi(c) / Phi(c) (reversed hazard), numerically stable for any c."""
    c = np.asarray(c, dtype=float)
    cc = np.clip(c, -_HAZARD_ASYMPTOTIC, _HAZARD_ASYMPTOTIC)
    direct = np.exp(-0.5 * cc * cc - _LOG_SQRT_2PI - log_ndtr(cc))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        series = -c - 1.0 / c + 2.0 / np.clip(c, -1e100, 1e100) ** 3
    return np.where(c < -_HAZARD_ASYMPTOTIC, series, direct)


def bvn_cdf(h, k, rho):
    """P(X <= h, Y <= k) for standard bivariate normal with correlation rho.

    Owen (1956): Phi2(h,k;rho) = (Phi(h)+Phi(k))/2 - T(h,a_h) - T(k,a_k) - d,
    with d = 1/2 iff hk < 0 (or hk = 0 with h+k < 0). Degenerate rho handled
    by the comonotone/antithetic limits. Vectorised over all arguments.
    """
    h, k, rho = np.broadcast_arrays(
        np.asarray(h, float), np.asarray(k, float), np.asarray(rho, float)
    )
    # nudge exact zeros so the a-ratios stay finite; T is continuous there
    tiny = 1e-15
    h = np.where(h == 0.0, tiny, h)
    k = np.where(k == 0.0, tiny, k)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        s = np.sqrt(np.clip((1.0 - rho) * (1.0 + rho), 1e-300, None))
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
        val = 0.5 * (ndtr(h) + ndtr(k)) - owens_t(h, ah) - owens_t(k, ak)
    val = val - np.where(h * k < 0.0, 0.5, 0.0)
    val = np.where(rho >= 1.0 - 1e-14, ndtr(np.minimum(h, k)), val)
    val = np.where(rho <= -1.0 + 1e-14, np.clip(ndtr(h) + ndtr(k) - 1.0, 0.0, None), val)
    out = np.clip(val, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BivariateSpec:
    """Rectangle probability problem for a bivariate normal.

    ``rect`` holds (lower, upper) per coordinate; use +-inf for open sides.
    """

    mean1: float
    mean2: float
    rho: float
    rect: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self) -> None:
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"correlation must lie in (-1, 1), got {self.rho}")
        for lo, hi in self.rect:
            if not lo <= hi:
                raise ValueError(f"rectangle side ({lo}, {hi}) has lower > upper")


def bvn_rect(spec: BivariateSpec) -> float:
    """Probability of the rectangle under the bivariate normal; abs err <= 1e-8."""
    (a1, b1), (a2, b2) = spec.rect
    a1, b1 = a1 - spec.mean1, b1 - spec.mean1
    a2, b2 = a2 - spec.mean2, b2 - spec.mean2
    r = spec.rho

    def cdf(x, y):
        if np.isneginf(x) or np.isneginf(y):
            return 0.0
        if np.isposinf(x) and np.isposinf(y):
            return 1.0
        if np.isposinf(x):
            return float(ndtr(y))
        if np.isposinf(y):
            return float(ndtr(x))
        return float(bvn_cdf(x, y, r))

    p = cdf(b1, b2) - cdf(a1, b2) - cdf(b1, a2) + cdf(a1, a2)
    return min(max(p, 0.0), 1.0)


class NoSignChangeError(ValueError):
    """Objective has the same sign at both bracket ends after expansion."""


class MaxIterationsError(RuntimeError):
    """Iteration limit reached before meeting the tolerance."""


@dataclass(frozen=True)
class RootProblem:
    """Bracketed scalar root problem for a monotone objective."""

    objective: Callable[[float], float]
    bracket_lo: float
    bracket_hi: float
    tol_x: float = 1e-8
    tol_f: float = 1e-10
    max_iter: int = 200
    expand_limit: float = 1.5

    def __post_init__(self) -> None:
        if not self.bracket_lo < self.bracket_hi:
            raise ValueError("bracket_lo must be < bracket_hi")
        if self.tol_x <= 0 or self.tol_f <= 0:
            raise ValueError("tolerances must be positive")


def find_root(problem: RootProblem) -> float:
    """Brent root of a monotone objective with geometric bracket expansion.

    The bracket grows symmetrically by doubling until a sign change appears or
    each end has moved ``expand_limit`` beyond the initial bracket.
    """
    f = problem.objective
    lo, hi = problem.bracket_lo, problem.bracket_hi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    step = (hi - lo) / 2.0
    min_lo, max_hi = problem.bracket_lo - problem.expand_limit, problem.bracket_hi + problem.expand_limit
    while flo * fhi > 0.0:
        if lo <= min_lo and hi >= max_hi:
            raise NoSignChangeError(
                f"no sign change on [{lo}, {hi}] (f: {flo:.3g}, {fhi:.3g})"
            )
        lo = max(lo - step, min_lo)
        hi = min(hi + step, max_hi)
        step *= 2.0
        flo, fhi = f(lo), f(hi)
    try:
        root, info = optimize.brentq(
            f, lo, hi, xtol=problem.tol_x, maxiter=problem.max_iter, full_output=True
        )
    except RuntimeError as exc:  # scipy raises RuntimeError on maxiter
        raise MaxIterationsError(str(exc)) from exc
    if not info.converged:
        raise MaxIterationsError(f"brentq did not converge after {problem.max_iter} iterations")
    return float(root)


def maximize_1d(
    objective: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8, max_iter: int = 500
) -> float:
    """Argmax of a unimodal objective on [lo, hi] (caller asserts unimodality)."""
    res = optimize.minimize_scalar(
        lambda x: -objective(x),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol, "maxiter": max_iter},
    )
    if not res.success:
        raise MaxIterationsError(f"bounded maximisation failed: {res.message}")
    return float(res.x)


def empirical_quantile(sample, p) -> float:
    """Order-statistic quantile with linear interpolation (numpy 'linear')."""
    arr = np.asarray(sample, dtype=float)
    if arr.size == 0:
        raise ValueError("empirical_quantile of an empty sample")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0.0) | (p_arr > 1.0)):
        raise ValueError(f"quantile probability must lie in [0, 1], got {p!r}")
    out = np.quantile(arr, p_arr, method="linear")
    return float(out) if out.ndim == 0 else out


def bisect_monotone(
    fn: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    iters: int = 80,
    tol_x: float = 1e-10,
) -> np.ndarray:
    """Vectorised bisection for elementwise-monotone fn with f(lo), f(hi) of
    opposite signs; keeps the sub-bracket whose ends disagree in sign."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = np.asarray(fn(lo), dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = np.asarray(fn(mid), dtype=float)
        same = (fm > 0.0) == (flo > 0.0)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
        if np.max(hi - lo) < tol_x:
            break
    return 0.5 * (lo + hi)
