"""Seeded, parallel Monte Carlo engine: trial generation, per-replicate CI
evaluation, coverage/width/consistency metrics, and sweeps over p_trt.

Reproducibility contract: every replicate owns counter-based substreams keyed
by (seed, replica_index, purpose), so results are bit-identical for a given
seed under any worker count or chunk schedule.  Metric partials are reduced in
fixed chunk order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .conditional import (
    RejectionStarvationError,
    _clip_estimate,
    _cond_mle_t2_vec,
    _cond_roots_t1,
    _cond_roots_t2,
    _rejection_sample_stage1,
    _stage1_solver,
    lambda_star,
)
from .numerics import empirical_quantile, norm_quantile
from .trial import (
    CiMethod,
    Design,
    SIMULATABLE_METHODS,
    TrialData,
    TrialStatistics,
    ValidationError,
    analyze_trial,
)
from .unconditional import MIN_RESAMPLES, _bootstrap_mles, _exact_ci_t2_arrays

__all__ = [
    "Scenario",
    "MetricRow",
    "SweepResult",
    "SnapshotRecord",
    "simulate_trial",
    "evaluate_metrics",
    "run_sweep",
    "replicate_snapshot",
]

CHUNK_SIZE = 2048

CONDITIONINGS = ("overall", "stage1", "stage2")

# purposes for the per-replicate substreams
_PURPOSE_TRIAL = 0
_PURPOSE_PARAM_BOOT = 2
_PURPOSE_COND_BOOT = 3


@dataclass(frozen=True)
class Scenario:
    """One simulation configuration: design, true rates, sizes, methods, seed."""

    design: Design
    p_ctrl: float
    p_trt: float
    n_replicates: int
    bootstrap_b: int
    methods: tuple[CiMethod, ...]
    seed: int

    def __post_init__(self) -> None:
        for name in ("p_ctrl", "p_trt"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {p}")
        if self.n_replicates < 1:
            raise ValidationError("n_replicates must be >= 1")
        if CiMethod.RANDOMISATION in self.methods:
            raise ValidationError("randomisation CI is not simulatable (analyze-only)")
        bad = [m for m in self.methods if m not in SIMULATABLE_METHODS]
        if bad:
            raise ValidationError(f"unknown simulation methods: {bad}")
        needs_boot = {
            CiMethod.PARAMETRIC_BOOTSTRAP,
            CiMethod.CONDITIONAL_LIKELIHOOD,
            CiMethod.PENALISED_LIKELIHOOD,
        }
        if needs_boot & set(self.methods) and self.bootstrap_b < MIN_RESAMPLES:
            raise ValidationError(
                f"bootstrap methods need bootstrap_b >= {MIN_RESAMPLES}, got {self.bootstrap_b}"
            )

    @property
    def true_theta(self) -> float:
        return self.p_trt - self.p_ctrl


@dataclass(frozen=True)
class MetricRow:
    """Per-method metrics for one conditioning set (overall / stage1 / stage2)."""

    method: CiMethod
    conditioning: str
    coverage: float
    width_mean: float
    width_sd: float
    consistency: float
    lower_miss: float
    upper_miss: float
    n_effective: int
    failure_count: int

    def mc_se(self, metric: str) -> float:
        """Monte Carlo standard error of a reported rate or of the width mean."""
        n = max(self.n_effective, 1)
        if metric == "width_mean":
            return self.width_sd / math.sqrt(n)
        value = getattr(self, metric)
        return math.sqrt(max(value * (1.0 - value), 0.0) / n)


@dataclass(frozen=True)
class SweepResult:
    """Metric rows and early-stopping probabilities over a p_trt grid."""

    p_trt_grid: tuple[float, ...]
    rows: tuple[tuple[MetricRow, ...], ...]
    stop_probability: tuple[float, ...]
    stop_probability_se: tuple[float, ...]


@dataclass(frozen=True)
class SnapshotRecord:
    """Plot-ready interval record for one replicate and method."""

    replicate: int
    stop_stage: int
    reject: bool
    method: CiMethod
    lower: float
    upper: float
    failed: bool


def _replicate_rng(seed: int, index: int, purpose: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(index, purpose))
    return np.random.Generator(np.random.Philox(seq))


def _generate_counts(scenario: Scenario, index: int):
    """Counts for one replicate from its dedicated substream.

    Returns (s1_ctrl, s1_trt, s2_ctrl, s2_trt, degenerate1); stage-2 counts
    are -1 when the replicate stopped at stage 1.  A degenerate stage-1 pooled
    rate carries no evidence and the replicate continues by convention.
    """
    d = scenario.design
    rng = _replicate_rng(scenario.seed, index, _PURPOSE_TRIAL)
    s1c = int(rng.binomial(d.n1_ctrl, scenario.p_ctrl))
    s1t = int(rng.binomial(d.n1_trt, scenario.p_trt))
    total = s1c + s1t
    degenerate = not (0 < total < d.n1_ctrl + d.n1_trt)
    if degenerate:
        z1 = 0.0
    else:
        pooled = total / (d.n1_ctrl + d.n1_trt)
        info1 = 1.0 / (pooled * (1.0 - pooled) * (1.0 / d.n1_ctrl + 1.0 / d.n1_trt))
        z1 = (s1t / d.n1_trt - s1c / d.n1_ctrl) * math.sqrt(info1)
    if z1 > d.e1:
        return s1c, s1t, -1, -1, degenerate
    s2c = int(rng.binomial(d.n2_ctrl_inc, scenario.p_ctrl))
    s2t = int(rng.binomial(d.n2_trt_inc, scenario.p_trt))
    return s1c, s1t, s2c, s2t, degenerate


def simulate_trial(scenario: Scenario, replica_index: int) -> tuple[TrialData, TrialStatistics | None]:
    """One trial replicate: binomial stage-1 counts, boundary check, stage-2
    increments when continuing.  Deterministic given (seed, replica_index).

    Degenerate replicates (pooled stage-1 rate 0 or 1) return None statistics.
    """
    s1c, s1t, s2c, s2t, degenerate = _generate_counts(scenario, replica_index)
    if s2c < 0:
        data = TrialData(s1_ctrl=s1c, s1_trt=s1t)
    else:
        data = TrialData(s1_ctrl=s1c, s1_trt=s1t, s2_ctrl=s2c, s2_trt=s2t)
    if degenerate:
        return data, None
    try:
        return data, analyze_trial(scenario.design, data)
    except ValidationError:
        return data, None


# ---------------------------------------------------------------------------
# chunk evaluation
# ---------------------------------------------------------------------------

_SUM_FIELDS = ("n_eff", "cover", "width", "width_sq", "consistent", "lower_miss", "upper_miss", "failures")


def _empty_sums(methods: Sequence[CiMethod]) -> dict:
    return {
        (m, cond): np.zeros(len(_SUM_FIELDS), dtype=np.float64)
        for m in methods
        for cond in CONDITIONINGS
    }


def _accumulate(
    sums: dict,
    method: CiMethod,
    masks: dict,
    usable: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    reject: np.ndarray,
    theta: float,
) -> None:
    width = upper - lower
    covered = (lower < theta) & (theta < upper)
    consistent = np.where(reject, lower > 0.0, (lower <= 0.0) & (0.0 <= upper))
    low_miss = lower > theta
    up_miss = upper < theta
    for cond, cond_mask in masks.items():
        sel = cond_mask & usable
        n = int(sel.sum())
        row = sums[(method, cond)]
        row[0] += n
        row[1] += int(covered[sel].sum())
        row[2] += float(width[sel].sum())
        row[3] += float((width[sel] ** 2).sum())
        row[4] += int(consistent[sel].sum())
        row[5] += int(low_miss[sel].sum())
        row[6] += int(up_miss[sel].sum())
        row[7] += int((cond_mask & ~usable).sum())


def _run_chunk(scenario: Scenario, start: int, stop: int, collect: bool):
    """Evaluate replicates [start, stop): metric partial sums and, when
    ``collect`` is set, the per-replicate interval values."""
    d = scenario.design
    n = stop - start
    methods = scenario.methods
    theta_true = scenario.true_theta
    alpha = d.alpha
    z_alpha = norm_quantile(1.0 - alpha / 2.0)

    s1c = np.empty(n, np.int64)
    s1t = np.empty(n, np.int64)
    s2c = np.empty(n, np.int64)
    s2t = np.empty(n, np.int64)
    degenerate = np.zeros(n, bool)
    for j in range(n):
        s1c[j], s1t[j], s2c[j], s2t[j], deg = _generate_counts(scenario, start + j)
        degenerate[j] = deg

    n1c, n1t, n2c, n2t = d.n1_ctrl, d.n1_trt, d.n2_ctrl, d.n2_trt
    with np.errstate(divide="ignore", invalid="ignore"):
        pooled1 = (s1c + s1t) / (n1c + n1t)
        info1 = 1.0 / (pooled1 * (1.0 - pooled1) * (1.0 / n1c + 1.0 / n1t))
        th1 = s1t / n1t - s1c / n1c
        z1 = th1 * np.sqrt(info1)
    stop_mask = np.where(degenerate, False, z1 > d.e1)
    cont = ~stop_mask

    cum_c = np.where(cont, s1c + np.maximum(s2c, 0), 0)
    cum_t = np.where(cont, s1t + np.maximum(s2t, 0), 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        pooled2 = (cum_c + cum_t) / (n2c + n2t)
        info2 = 1.0 / (pooled2 * (1.0 - pooled2) * (1.0 / n2c + 1.0 / n2t))
        th2 = cum_t / n2t - cum_c / n2c
        z2 = th2 * np.sqrt(info2)
    degenerate2 = cont & ~((pooled2 > 0.0) & (pooled2 < 1.0))
    rep_fail = degenerate | degenerate2
    info_dec = cont & ~rep_fail & (info2 <= info1)

    theta_hat = np.where(stop_mask, th1, th2)
    info_t = np.where(stop_mask, info1, info2)
    reject = np.where(stop_mask, True, z2 > d.e2) & ~rep_fail

    masks = {
        "overall": np.ones(n, bool),
        "stage1": stop_mask & ~rep_fail,
        "stage2": cont & ~rep_fail,
    }
    ok_base = ~rep_fail
    t2 = cont & ok_base
    t1 = stop_mask & ok_base

    sums = _empty_sums(methods)
    values: dict[CiMethod, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def record(method, usable, lower, upper):
        _accumulate(sums, method, masks, usable, lower, upper, reject, theta_true)
        if collect:
            values[method] = (usable.copy(), lower.copy(), upper.copy())

    nan = np.full(n, np.nan)

    if CiMethod.WALD in methods:
        p_t = np.where(stop_mask, s1t / n1t, cum_t / n2t)
        p_c = np.where(stop_mask, s1c / n1c, cum_c / n2c)
        nn_t = np.where(stop_mask, n1t, n2t)
        nn_c = np.where(stop_mask, n1c, n2c)
        se = np.sqrt(p_t * (1 - p_t) / nn_t + p_c * (1 - p_c) / nn_c)
        record(CiMethod.WALD, ok_base, theta_hat - z_alpha * se, theta_hat + z_alpha * se)

    if CiMethod.REPEATED in methods:
        e_t = np.where(stop_mask, d.e1, d.e2)
        half = e_t / np.sqrt(info_t)
        record(CiMethod.REPEATED, ok_base, theta_hat - half, theta_hat + half)

    if CiMethod.ADJUSTED_ASYMPTOTIC in methods:
        half = z_alpha / np.sqrt(info_t)
        record(
            CiMethod.ADJUSTED_ASYMPTOTIC,
            ok_base & ~info_dec,
            theta_hat - half,
            theta_hat + half,
        )

    if CiMethod.EXACT in methods:
        lower = nan.copy()
        upper = nan.copy()
        r1 = np.sqrt(info1)
        lower[t1] = ((z1 - z_alpha) / r1)[t1]
        upper[t1] = ((z1 + z_alpha) / r1)[t1]
        rows2 = t2 & ~info_dec
        if np.any(rows2):
            lo2, hi2 = _exact_ci_t2_arrays(
                z2[rows2], info1[rows2], info2[rows2], d.e1, alpha
            )
            lower[rows2] = lo2
            upper[rows2] = hi2
        record(CiMethod.EXACT, ok_base & ~info_dec, lower, upper)

    cond_methods = {CiMethod.CONDITIONAL_EXACT, CiMethod.RESTRICTED_CONDITIONAL_EXACT}
    if cond_methods & set(methods):
        lower = nan.copy()
        upper = nan.copy()
        if np.any(t1):
            lo1, hi1, _ = _cond_roots_t1(z1[t1], info1[t1], d.e1, alpha)
            lower[t1] = lo1
            upper[t1] = hi1
        rows2 = t2 & ~info_dec
        if np.any(rows2):
            lo2, hi2, _ = _cond_roots_t2(z2[rows2], info1[rows2], info2[rows2], d.e1, alpha)
            lower[rows2] = lo2
            upper[rows2] = hi2
        usable = ok_base & ~info_dec
        if CiMethod.CONDITIONAL_EXACT in methods:
            record(CiMethod.CONDITIONAL_EXACT, usable, lower, upper)
        if CiMethod.RESTRICTED_CONDITIONAL_EXACT in methods:
            r1 = np.sqrt(info1)
            cap_hi = (d.e1 - norm_quantile(alpha / 2.0)) / r1
            cap_lo = (d.e1 - z_alpha) / r1
            r_lower = np.where(stop_mask, np.maximum(lower, cap_lo), lower)
            r_upper = np.where(stop_mask, upper, np.minimum(upper, cap_hi))
            record(CiMethod.RESTRICTED_CONDITIONAL_EXACT, usable, r_lower, r_upper)

    boot_param = CiMethod.PARAMETRIC_BOOTSTRAP in methods
    boot_cond = CiMethod.CONDITIONAL_LIKELIHOOD in methods
    boot_pen = CiMethod.PENALISED_LIKELIHOOD in methods
    if boot_param or boot_cond or boot_pen:
        b = scenario.bootstrap_b
        qs = (alpha / 2.0, 1.0 - alpha / 2.0)
        pb_lo, pb_hi = nan.copy(), nan.copy()
        cl_lo, cl_hi = nan.copy(), nan.copy()
        pl_lo, pl_hi = nan.copy(), nan.copy()
        starved = np.zeros(n, bool)
        lam = lambda_star(d) if boot_pen else 1.0
        solver_cond = _stage1_solver(d.e1, 1.0)
        solver_pen = _stage1_solver(d.e1, lam)
        for j in range(n):
            if rep_fail[j]:
                continue
            if stop_mask[j]:
                p_c, p_t = s1c[j] / n1c, s1t[j] / n1t
            else:
                p_c, p_t = cum_c[j] / n2c, cum_t[j] / n2t
            idx = start + j
            if boot_param:
                rng = _replicate_rng(scenario.seed, idx, _PURPOSE_PARAM_BOOT)
                mles = _bootstrap_mles(rng, d, p_c, p_t, b)
                pb_lo[j], pb_hi[j] = empirical_quantile(mles, qs)
            if boot_cond or boot_pen:
                rng = _replicate_rng(scenario.seed, idx, _PURPOSE_COND_BOOT)
                try:
                    a1c, a1t = _rejection_sample_stage1(
                        rng, d, p_c, p_t, want_stop=bool(stop_mask[j]), b=b
                    )
                except RejectionStarvationError:
                    starved[j] = True
                    continue
                if stop_mask[j]:
                    pooled_b = (a1c + a1t) / (n1c + n1t)
                    info_b = 1.0 / (pooled_b * (1.0 - pooled_b) * (1.0 / n1c + 1.0 / n1t))
                    z1_b = (a1t / n1t - a1c / n1c) * np.sqrt(info_b)
                    th_hat_b = z1_b / np.sqrt(info_b)
                    if boot_cond:
                        est = _clip_estimate(solver_cond.solve_z(z1_b) / np.sqrt(info_b), th_hat_b)
                        cl_lo[j], cl_hi[j] = empirical_quantile(est, qs)
                    if boot_pen:
                        est = _clip_estimate(solver_pen.solve_z(z1_b) / np.sqrt(info_b), th_hat_b)
                        pl_lo[j], pl_hi[j] = empirical_quantile(est, qs)
                else:
                    b2c = a1c + rng.binomial(d.n2_ctrl_inc, p_c, b)
                    b2t = a1t + rng.binomial(d.n2_trt_inc, p_t, b)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        pool1 = (a1c + a1t) / (n1c + n1t)
                        i1b = 1.0 / (pool1 * (1.0 - pool1) * (1.0 / n1c + 1.0 / n1t))
                        pool2 = (b2c + b2t) / (n2c + n2t)
                        i2b = 1.0 / (pool2 * (1.0 - pool2) * (1.0 / n2c + 1.0 / n2t))
                        th_b = b2t / n2t - b2c / n2c
                        z2_b = th_b * np.sqrt(i2b)
                    good = np.isfinite(i1b) & np.isfinite(i2b) & (i2b > i1b)
                    est = th_b.copy()
                    if np.any(good):
                        x = _cond_mle_t2_vec(
                            z2_b[good], np.sqrt(np.clip(i1b[good] / i2b[good], 0, 1)), d.e1
                        )
                        est[good] = x / np.sqrt(i2b[good])
                    est = _clip_estimate(est, th_b)
                    lo_j, hi_j = empirical_quantile(est, qs)
                    if boot_cond:
                        cl_lo[j], cl_hi[j] = lo_j, hi_j
                    if boot_pen:
                        pl_lo[j], pl_hi[j] = lo_j, hi_j
        if boot_param:
            record(CiMethod.PARAMETRIC_BOOTSTRAP, ok_base, pb_lo, pb_hi)
        cond_usable = ok_base & ~info_dec & ~starved
        if boot_cond:
            record(CiMethod.CONDITIONAL_LIKELIHOOD, cond_usable, cl_lo, cl_hi)
        if boot_pen:
            record(CiMethod.PENALISED_LIKELIHOOD, cond_usable, pl_lo, pl_hi)

    chunk_stats = np.array(
        [
            float((stop_mask & ~rep_fail).sum()),
            float((cont & ~rep_fail).sum()),
            float(rep_fail.sum()),
        ]
    )
    collected = None
    if collect:
        collected = {
            "stop_stage": np.where(stop_mask, 1, 2),
            "reject": reject,
            "rep_fail": rep_fail,
            "values": values,
        }
    return sums, chunk_stats, collected


def _chunk_ranges(n: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + CHUNK_SIZE, n)) for lo in range(0, n, CHUNK_SIZE)]


def _run_scenario(scenario: Scenario, workers: int = 1):
    """All chunks, serially or in a process pool; partials reduced in fixed order."""
    ranges = _chunk_ranges(scenario.n_replicates)
    results = []
    if workers <= 1 or len(ranges) == 1:
        for lo, hi in ranges:
            results.append(_run_chunk(scenario, lo, hi, collect=False))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, scenario, lo, hi, False) for lo, hi in ranges]
            results = [f.result() for f in futures]
    total = _empty_sums(scenario.methods)
    stats = np.zeros(3)
    for sums, chunk_stats, _ in results:
        for key, row in sums.items():
            total[key] += row
        stats += chunk_stats
    return total, stats


def _rows_from_sums(scenario: Scenario, total: dict) -> list[MetricRow]:
    rows = []
    for method in scenario.methods:
        for cond in CONDITIONINGS:
            s = total[(method, cond)]
            n_eff = int(s[0])
            if n_eff > 0:
                mean_w = s[2] / n_eff
                var_w = max(s[3] / n_eff - mean_w * mean_w, 0.0)
                rows.append(
                    MetricRow(
                        method=method,
                        conditioning=cond,
                        coverage=float(s[1] / n_eff),
                        width_mean=float(mean_w),
                        width_sd=float(math.sqrt(var_w)),
                        consistency=float(s[4] / n_eff),
                        lower_miss=float(s[5] / n_eff),
                        upper_miss=float(s[6] / n_eff),
                        n_effective=n_eff,
                        failure_count=int(s[7]),
                    )
                )
            else:
                rows.append(
                    MetricRow(method, cond, math.nan, math.nan, math.nan, math.nan,
                              math.nan, math.nan, 0, int(s[7]))
                )
    return rows


def evaluate_metrics(scenario: Scenario, workers: int = 1) -> list[MetricRow]:
    """Coverage, width (mean and SD), test-decision consistency and miss rates
    per method, overall and conditional on the stopping stage.

    Replicates where a method fails (information decrease, degenerate counts,
    rejection starvation) are excluded from that method's denominators and
    counted in ``failure_count``.
    """
    total, _ = _run_scenario(scenario, workers=workers)
    return _rows_from_sums(scenario, total)


def stop_rate(scenario: Scenario, workers: int = 1) -> tuple[float, float]:
    """Empirical stage-1 stopping fraction and its Monte Carlo SE."""
    _, stats = _run_scenario(replace(scenario, methods=(CiMethod.REPEATED,)), workers=workers)
    n = stats[0] + stats[1]
    p = stats[0] / n if n else math.nan
    se = math.sqrt(max(p * (1 - p), 0.0) / n) if n else math.nan
    return p, se


def run_sweep(
    base_scenario: Scenario, p_trt_grid: Iterable[float], workers: int = 1
) -> SweepResult:
    """Full metric rows per grid point plus the early-stopping curve.

    The same seed is reused across grid points (common random numbers), so
    curves vary smoothly in p_trt.
    """
    grid = tuple(float(p) for p in p_trt_grid)
    if not grid:
        raise ValidationError("sweep grid must be nonempty")
    if any(b >= a for a, b in zip(grid[1:], grid)):
        raise ValidationError("sweep grid must be strictly increasing")
    all_rows = []
    stops = []
    ses = []
    for p in grid:
        scenario = replace(base_scenario, p_trt=p)
        total, stats = _run_scenario(scenario, workers=workers)
        all_rows.append(tuple(_rows_from_sums(scenario, total)))
        n = stats[0] + stats[1]
        rate = float(stats[0] / n) if n else math.nan
        stops.append(rate)
        ses.append(math.sqrt(max(rate * (1 - rate), 0.0) / n) if n else math.nan)
    return SweepResult(
        p_trt_grid=grid,
        rows=tuple(all_rows),
        stop_probability=tuple(stops),
        stop_probability_se=tuple(ses),
    )


def replicate_snapshot(scenario: Scenario, k: int) -> list[SnapshotRecord]:
    """Interval fan for the first ``k`` replicates, one record per method."""
    if k < 0 or k > scenario.n_replicates:
        raise ValidationError(f"k must lie in [0, {scenario.n_replicates}]")
    if k == 0:
        return []
    small = replace(scenario, n_replicates=k)
    records: list[SnapshotRecord] = []
    offset = 0
    for lo, hi in _chunk_ranges(k):
        _, _, collected = _run_chunk(small, lo, hi, collect=True)
        stop_stage = collected["stop_stage"]
        reject = collected["reject"]
        rep_fail = collected["rep_fail"]
        for j in range(hi - lo):
            for method in scenario.methods:
                usable, lower, upper = collected["values"][method]
                failed = bool(rep_fail[j] or not usable[j])
                records.append(
                    SnapshotRecord(
                        replicate=offset + j,
                        stop_stage=int(stop_stage[j]),
                        reject=bool(reject[j]),
                        method=method,
                        lower=float(lower[j]),
                        upper=float(upper[j]),
                        failed=failed,
                    )
                )
        offset += hi - lo
    return records
