"""Command-line interface: analyze | simulate | sweep | snapshot.

Outputs are CSV files (dot decimal, full double precision, LF newlines) plus a
run manifest; two runs with identical resolved configuration produce
byte-identical CSVs regardless of worker count.
"""
from __future__ import annotations

import argparse
import os
import sys
import platform

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .conditional import (
    conditional_likelihood_ci,
    exact_conditional_ci,
    penalised_likelihood_ci,
    restricted_exact_conditional_ci,
)
from .simulation import (
    CONDITIONINGS,
    MetricRow,
    Scenario,
    evaluate_metrics,
    replicate_snapshot,
    run_sweep,
)
from .trial import CiMethod, CiResult, ValidationError, analyze_trial
from .unconditional import (
    adjusted_asymptotic_ci,
    exact_ci,
    parametric_bootstrap_ci,
    randomisation_ci,
    repeated_ci,
    wald_ci,
)

_METHOD_LABELS = {
    CiMethod.WALD: "Wald",
    CiMethod.EXACT: "Exact",
    CiMethod.REPEATED: "Repeated",
    CiMethod.ADJUSTED_ASYMPTOTIC: "Adjusted asymptotic",
    CiMethod.PARAMETRIC_BOOTSTRAP: "Parametric bootstrap",
    CiMethod.RANDOMISATION: "Randomisation-based",
    CiMethod.CONDITIONAL_EXACT: "Conditional exact",
    CiMethod.RESTRICTED_CONDITIONAL_EXACT: "Restricted conditional exact",
    CiMethod.CONDITIONAL_LIKELIHOOD: "Conditional likelihood",
    CiMethod.PENALISED_LIKELIHOOD: "Penalised likelihood",
}


def _fmt(x) -> str:
    """Full-precision, locale-independent float formatting for CSV cells."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [_fmt(c) for c in row]
        for c in cells:
            if "," in c:
                raise ValueError(f"CSV cell contains a comma: {c!r}")
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(cfg: RunConfig, out_dir: str) -> None:
    lines = ["[seqci run manifest]"]
    for key, value in cfg.resolved_items():
        lines.append(f"{key} = {value}")
    lines.append(f"config_hash = {cfg.manifest_hash()}")
    lines.append(f"seqci_version = {__version__}")
    lines.append(f"python_version = {platform.python_version()}")
    lines.append(f"numpy_version = {np.__version__}")
    import scipy

    lines.append(f"scipy_version = {scipy.__version__}")
    with open(os.path.join(out_dir, "run_manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _compute_interval(method: CiMethod, cfg: RunConfig, design, trial) -> CiResult:
    seed = cfg.seed if cfg.seed is not None else 0
    if method is CiMethod.WALD:
        return wald_ci(design, trial)
    if method is CiMethod.EXACT:
        return exact_ci(design, trial)
    if method is CiMethod.REPEATED:
        return repeated_ci(design, trial)
    if method is CiMethod.ADJUSTED_ASYMPTOTIC:
        return adjusted_asymptotic_ci(design, trial)
    if method is CiMethod.PARAMETRIC_BOOTSTRAP:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0, 10))))
        return parametric_bootstrap_ci(design, trial, cfg.bootstrap_b, rng)
    if method is CiMethod.RANDOMISATION:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0, 11))))
        return randomisation_ci(
            design, trial, cfg.n_randomisation, rng,
            include_observed=cfg.include_observed_allocation,
        )
    if method is CiMethod.CONDITIONAL_EXACT:
        return exact_conditional_ci(design, trial)
    if method is CiMethod.RESTRICTED_CONDITIONAL_EXACT:
        return restricted_exact_conditional_ci(design, trial)
    if method is CiMethod.CONDITIONAL_LIKELIHOOD:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0, 12))))
        return conditional_likelihood_ci(design, trial, cfg.bootstrap_b, rng)
    if method is CiMethod.PENALISED_LIKELIHOOD:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0, 12))))
        return penalised_likelihood_ci(design, trial, cfg.bootstrap_b, rng)
    raise ValidationError(f"unhandled method {method}")


def _cmd_analyze(cfg: RunConfig) -> int:
    design = cfg.design()
    data = cfg.trial_data()
    trial = analyze_trial(design, data)
    methods = cfg.method_list()
    rows = []
    for method in methods:
        res = _compute_interval(method, cfg, design, trial)
        width = res.width if not res.failed else float("nan")
        rows.append([
            method.value,
            res.point,
            res.lower,
            res.upper,
            width,
            ";".join(sorted(res.flags)),
        ])
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.format == "csv":
        _write_csv(
            os.path.join(cfg.out, "analyze.csv"),
            ["method", "point", "lower", "upper", "width", "flags"],
            rows,
        )
    else:
        print(f"{'CI method':<30}{'Point':>8}  {'95% two-sided CI':>18}  {'Width':>7}  Flags")
        for method, point, lower, upper, width, flags in rows:
            label = _METHOD_LABELS[CiMethod(method)]
            pt = "-" if point is None else f"{point:.3f}"
            ci = f"({lower:.3f}, {upper:.3f})" if lower == lower else "(-, -)"
            w = f"{width:.3f}" if width == width else "-"
            print(f"{label:<30}{pt:>8}  {ci:>18}  {w:>7}  {flags}")
    _write_manifest(cfg, cfg.out)
    return 0


def _metric_row_cells(row: MetricRow) -> list:
    return [
        row.method.value,
        row.coverage,
        row.width_mean,
        row.width_sd,
        row.consistency,
        row.lower_miss,
        row.upper_miss,
        row.n_effective,
        row.failure_count,
    ]


_METRIC_HEADER = [
    "method", "coverage", "width_mean", "width_sd", "consistency",
    "lower_miss", "upper_miss", "n_effective", "failures",
]


def _scenario_from_config(cfg: RunConfig, p_trt: float | None = None) -> Scenario:
    design = cfg.design()
    if cfg.p_ctrl is None or (cfg.p_trt is None and p_trt is None):
        raise ConfigError("simulation needs p_ctrl and p_trt")
    return Scenario(
        design=design,
        p_ctrl=cfg.p_ctrl,
        p_trt=cfg.p_trt if p_trt is None else p_trt,
        n_replicates=cfg.n_replicates,
        bootstrap_b=cfg.bootstrap_b,
        methods=cfg.method_list(simulatable_only=True),
        seed=cfg.seed,
    )


def _cmd_simulate(cfg: RunConfig) -> int:
    scenario = _scenario_from_config(cfg)
    rows = evaluate_metrics(scenario, workers=cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    for cond in CONDITIONINGS:
        path = os.path.join(cfg.out, f"metrics_{cond}.csv")
        _write_csv(
            path,
            _METRIC_HEADER,
            [_metric_row_cells(r) for r in rows if r.conditioning == cond],
        )
    _write_manifest(cfg, cfg.out)
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    grid = cfg.grid_values()
    scenario = _scenario_from_config(cfg, p_trt=grid[0])
    result = run_sweep(scenario, grid, workers=cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    long_rows = []
    for p, rows in zip(result.p_trt_grid, result.rows):
        for row in rows:
            for metric in ("coverage", "width_mean", "consistency", "lower_miss", "upper_miss"):
                long_rows.append([
                    p, row.method.value, row.conditioning, metric,
                    getattr(row, metric), row.mc_se(metric),
                ])
    _write_csv(
        os.path.join(cfg.out, "sweep_metrics.csv"),
        ["p_trt", "method", "conditioning", "metric", "value", "mc_se"],
        long_rows,
    )
    _write_csv(
        os.path.join(cfg.out, "stop_probability.csv"),
        ["p_trt", "stop_probability", "mc_se"],
        [
            [p, s, se]
            for p, s, se in zip(result.p_trt_grid, result.stop_probability, result.stop_probability_se)
        ],
    )
    _write_manifest(cfg, cfg.out)
    return 0


def _cmd_snapshot(cfg: RunConfig) -> int:
    scenario = _scenario_from_config(cfg)
    records = replicate_snapshot(scenario, cfg.snapshot_k)
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(
        os.path.join(cfg.out, "snapshot.csv"),
        ["replicate", "stop_stage", "reject", "method", "lower", "upper", "failed"],
        [
            [r.replicate, r.stop_stage, int(r.reject), r.method.value, r.lower, r.upper, int(r.failed)]
            for r in records
        ],
    )
    _write_manifest(cfg, cfg.out)
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "snapshot": _cmd_snapshot,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqci",
        description="Confidence intervals and coverage simulation for a two-stage "
        "group sequential trial with a binary endpoint.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="flat key=value config file")
        p.add_argument("--musec", action="store_true", default=None,
                       help="use the bundled case-study design and data")
        p.add_argument("--methods", metavar="LIST|all", dest="methods")
        p.add_argument("--N", type=int, dest="n_replicates", metavar="N",
                       help="simulation replicates")
        p.add_argument("--B", type=int, dest="bootstrap_b", metavar="B",
                       help="bootstrap resamples per interval")
        p.add_argument("--N-rand", type=int, dest="n_randomisation", metavar="N",
                       help="randomisation resamples (analyze)")
        p.add_argument("--seed", type=int, dest="seed")
        p.add_argument("--grid", metavar="LO:HI:COUNT")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--format", choices=["csv", "table"])
        p.add_argument("--workers", type=int, dest="workers")
        p.add_argument("--k", type=int, dest="snapshot_k", help="snapshot replicates")
        p.add_argument("--p-ctrl", type=float, dest="p_ctrl")
        p.add_argument("--p-trt", type=float, dest="p_trt")
        for key in ("n1-ctrl", "n1-trt", "n2-ctrl", "n2-trt"):
            p.add_argument(f"--{key}", type=int, dest=key.replace("-", "_"))
        p.add_argument("--e1", type=float, dest="e1")
        p.add_argument("--e2", type=float, dest="e2")
        p.add_argument("--alpha", type=float, dest="alpha")
        for key in ("s1-ctrl", "s1-trt", "s2-ctrl", "s2-trt"):
            p.add_argument(f"--{key}", type=int, dest=key.replace("-", "_"))
        p.add_argument("--include-observed-allocation", action="store_true", default=None,
                       dest="include_observed_allocation")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    flags = {
        k: v
        for k, v in vars(ns).items()
        if k not in ("command", "config") and v is not None
    }
    try:
        cfg = load_config(ns.command, config_path=ns.config, flag_values=flags)
        return _COMMANDS[ns.command](cfg)
    except (ConfigError, ValidationError) as exc:
        print(f"seqci: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
