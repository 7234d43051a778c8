"""Run configuration: flat key=value config files, SEQCI_* environment
overrides, command-line flag overrides, and the resolved-run manifest.

Precedence: flags > environment > config file > defaults.  The manifest hash
covers the fully resolved configuration, so identical configs hash identically.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, fields

from .trial import CiMethod, Design, SIMULATABLE_METHODS, TrialData, ValidationError

__all__ = ["RunConfig", "load_config", "ConfigError"]

ENV_PREFIX = "SEQCI_"


class ConfigError(ValidationError):
    """Bad configuration key, type, or range; message names the offender."""


_INT_KEYS = {
    "n1_ctrl", "n1_trt", "n2_ctrl", "n2_trt",
    "s1_ctrl", "s1_trt", "s2_ctrl", "s2_trt",
    "n_replicates", "bootstrap_b", "n_randomisation", "seed", "snapshot_k", "workers",
}
_FLOAT_KEYS = {"e1", "e2", "alpha", "p_ctrl", "p_trt"}
_STR_KEYS = {"methods", "grid", "out", "format"}
_BOOL_KEYS = {"musec", "include_observed_allocation"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _BOOL_KEYS

_RANGES = {
    "alpha": (0.0, 1.0),
    "p_ctrl": (0.0, 1.0),
    "p_trt": (0.0, 1.0),
}


@dataclass
class RunConfig:
    """Fully resolved options for one CLI invocation."""

    command: str
    musec: bool = False
    n1_ctrl: int | None = None
    n1_trt: int | None = None
    n2_ctrl: int | None = None
    n2_trt: int | None = None
    e1: float | None = None
    e2: float | None = None
    alpha: float = 0.05
    s1_ctrl: int | None = None
    s1_trt: int | None = None
    s2_ctrl: int | None = None
    s2_trt: int | None = None
    p_ctrl: float | None = None
    p_trt: float | None = None
    n_replicates: int = 100_000
    bootstrap_b: int = 10_000
    n_randomisation: int = 10_000
    seed: int | None = None
    methods: str = "all"
    grid: str | None = None
    out: str = "."
    format: str = "csv"
    snapshot_k: int = 10
    workers: int = 1
    include_observed_allocation: bool = False
    sources: dict = field(default_factory=dict, repr=False)

    def design(self) -> Design:
        if self.musec:
            from .musec import MUSEC_DESIGN

            return MUSEC_DESIGN
        needed = ("n1_ctrl", "n1_trt", "n2_ctrl", "n2_trt", "e1", "e2")
        missing = [k for k in needed if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"design is incomplete: missing {', '.join(missing)} (or use --musec)")
        return Design(
            n1_ctrl=self.n1_ctrl, n1_trt=self.n1_trt,
            n2_ctrl=self.n2_ctrl, n2_trt=self.n2_trt,
            e1=self.e1, e2=self.e2, alpha=self.alpha,
        )

    def trial_data(self) -> TrialData:
        if self.musec and self.s1_ctrl is None:
            from .musec import MUSEC_DATA

            return MUSEC_DATA
        if self.s1_ctrl is None or self.s1_trt is None:
            raise ConfigError("trial data incomplete: s1_ctrl and s1_trt are required")
        return TrialData(
            s1_ctrl=self.s1_ctrl, s1_trt=self.s1_trt,
            s2_ctrl=self.s2_ctrl, s2_trt=self.s2_trt,
        )

    def method_list(self, simulatable_only: bool = False) -> tuple[CiMethod, ...]:
        if self.methods.strip().lower() == "all":
            chosen = SIMULATABLE_METHODS if simulatable_only else tuple(CiMethod)
            return chosen
        out = []
        for name in self.methods.split(","):
            name = name.strip()
            if not name:
                continue
            try:
                out.append(CiMethod(name))
            except ValueError:
                valid = ", ".join(m.value for m in CiMethod)
                raise ConfigError(f"unknown method {name!r}; valid: {valid}") from None
        if not out:
            raise ConfigError("methods resolved to an empty list")
        return tuple(out)

    def grid_values(self) -> list[float]:
        if not self.grid:
            raise ConfigError("sweep needs --grid LO:HI:COUNT")
        parts = self.grid.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be LO:HI:COUNT, got {self.grid!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"grid {self.grid!r}: {exc}") from None
        if count < 1 or not lo < hi:
            raise ConfigError(f"grid {self.grid!r}: need LO < HI and COUNT >= 1")
        if count == 1:
            return [lo]
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]

    def resolved_items(self) -> list[tuple[str, str]]:
        skip = {"sources"}
        items = []
        for f in fields(self):
            if f.name in skip:
                continue
            items.append((f.name, repr(getattr(self, f.name))))
        return items

    def manifest_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in self.resolved_items())
        return hashlib.sha256(payload.encode()).hexdigest()


def _parse_value(key: str, raw: str, where: str):
    if key not in _ALL_KEYS:
        raise ConfigError(f"unknown key {key!r} ({where})")
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            value = int(raw)
        elif key in _FLOAT_KEYS:
            value = float(raw)
        elif key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                value = True
            elif low in ("0", "false", "no", "off"):
                value = False
            else:
                raise ValueError(f"not a boolean: {raw!r}")
        else:
            value = raw
    except ValueError as exc:
        raise ConfigError(f"key {key!r} ({where}): {exc}") from None
    lohi = _RANGES.get(key)
    if lohi is not None and not lohi[0] < value < lohi[1]:
        raise ConfigError(f"key {key!r} ({where}): {value} outside ({lohi[0]}, {lohi[1]})")
    return value


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        values[key] = _parse_value(key, raw, where=f"{path}:{lineno}")
    return values


def _env_overrides() -> dict:
    values = {}
    for key in sorted(_ALL_KEYS):
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _parse_value(key, raw, where=f"env {ENV_PREFIX}{key.upper()}")
    return values


def load_config(command: str, config_path: str | None = None, flag_values: dict | None = None) -> RunConfig:
    """Resolve a RunConfig from file, environment and flags (in that order)."""
    merged: dict = {}
    sources: dict = {}
    if config_path:
        for k, v in _read_config_file(config_path).items():
            merged[k] = v
            sources[k] = "file"
    for k, v in _env_overrides().items():
        merged[k] = v
        sources[k] = "env"
    for k, v in (flag_values or {}).items():
        if v is None:
            continue
        if k not in _ALL_KEYS:
            raise ConfigError(f"unknown flag key {k!r}")
        merged[k] = v
        sources[k] = "flag"
    cfg = RunConfig(command=command, **merged)
    cfg.sources = sources
    resampling = {
        CiMethod.PARAMETRIC_BOOTSTRAP,
        CiMethod.RANDOMISATION,
        CiMethod.CONDITIONAL_LIKELIHOOD,
        CiMethod.PENALISED_LIKELIHOOD,
    }
    selected = set(cfg.method_list())  # validates method names early
    needs_seed = command in ("simulate", "sweep", "snapshot") or bool(resampling & selected)
    if needs_seed and cfg.seed is None:
        raise ConfigError("seed is required (no hidden entropy); pass --seed or seed=")
    return cfg
