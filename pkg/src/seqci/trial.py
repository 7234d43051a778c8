"""Two-stage group sequential design, observed trial data and derived statistics.

The design has one interim look with an efficacy boundary on the standardised
Z scale: the trial stops at stage 1 iff Z1 > e1, otherwise it continues to the
final analysis where the null is rejected iff Z2 > e2.

Conventions (these reproduce the published test statistics for the bundled
case study to 1e-3):

* information I_k = 1 / [p~(1-p~) (1/n_ctrl + 1/n_trt)] with p~ the pooled
  success rate over both arms (cumulative through stage k);
* Z_k = theta_hat_k * sqrt(I_k) with theta_hat_k = p_trt - p_ctrl on
  cumulative counts;
* stage-2 counts are stored incrementally (stage-2 only), cumulative values
  are derived.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "CiMethod",
    "Design",
    "TrialData",
    "StageStatistics",
    "TrialStatistics",
    "CiResult",
    "DegenerateDataError",
    "InformationDecreaseError",
    "ValidationError",
    "information",
    "stage_statistics",
    "analyze_trial",
    "stop_probability",
]


class ValidationError(ValueError):
    """Invalid design/data/configuration input."""


class DegenerateDataError(ValidationError):
    """Pooled success rate is 0 or 1: observed information is undefined."""


class InformationDecreaseError(ValueError):
    """I2 <= I1: conditional and adjusted methods are not computable."""


class CiMethod(enum.Enum):
    """The ten interval methods, in the presentation order of the case study."""

    WALD = "wald"
    EXACT = "exact"
    REPEATED = "repeated"
    ADJUSTED_ASYMPTOTIC = "adjusted_asymptotic"
    PARAMETRIC_BOOTSTRAP = "parametric_bootstrap"
    RANDOMISATION = "randomisation"
    CONDITIONAL_EXACT = "conditional_exact"
    RESTRICTED_CONDITIONAL_EXACT = "restricted_conditional_exact"
    CONDITIONAL_LIKELIHOOD = "conditional_likelihood"
    PENALISED_LIKELIHOOD = "penalised_likelihood"

    def __str__(self) -> str:
        return self.value


#: Methods usable inside the simulation engine (randomisation is analyze-only).
SIMULATABLE_METHODS = tuple(m for m in CiMethod if m is not CiMethod.RANDOMISATION)


@dataclass(frozen=True)
class Design:
    """Two-stage design: cumulative per-arm sample sizes, boundaries, CI level."""

    n1_ctrl: int
    n1_trt: int
    n2_ctrl: int
    n2_trt: int
    e1: float
    e2: float
    alpha: float = 0.05

    def __post_init__(self) -> None:
        for name in ("n1_ctrl", "n1_trt", "n2_ctrl", "n2_trt"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if not (0 < self.n1_ctrl < self.n2_ctrl):
            raise ValidationError("need 0 < n1_ctrl < n2_ctrl")
        if not (0 < self.n1_trt < self.n2_trt):
            raise ValidationError("need 0 < n1_trt < n2_trt")
        if not (self.e1 > self.e2 > 0):
            raise ValidationError("boundaries must satisfy e1 > e2 > 0")
        if not (0 < self.alpha < 1):
            raise ValidationError("alpha must lie in (0, 1)")

    @property
    def n2_ctrl_inc(self) -> int:
        return self.n2_ctrl - self.n1_ctrl

    @property
    def n2_trt_inc(self) -> int:
        return self.n2_trt - self.n1_trt


@dataclass(frozen=True)
class TrialData:
    """Observed success counts; stage-2 counts are incremental (stage 2 only)."""

    s1_ctrl: int
    s1_trt: int
    s2_ctrl: int | None = None
    s2_trt: int | None = None

    def __post_init__(self) -> None:
        if (self.s2_ctrl is None) != (self.s2_trt is None):
            raise ValidationError("stage-2 counts must be given for both arms or neither")
        for name in ("s1_ctrl", "s1_trt", "s2_ctrl", "s2_trt"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 0):
                raise ValidationError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def has_stage2(self) -> bool:
        return self.s2_ctrl is not None

    def validate_against(self, design: Design) -> None:
        if not (0 <= self.s1_ctrl <= design.n1_ctrl and 0 <= self.s1_trt <= design.n1_trt):
            raise ValidationError("stage-1 successes exceed stage-1 sample sizes")
        if self.has_stage2:
            if not (0 <= self.s2_ctrl <= design.n2_ctrl_inc and 0 <= self.s2_trt <= design.n2_trt_inc):
                raise ValidationError("stage-2 successes exceed stage-2 incremental sample sizes")


@dataclass(frozen=True)
class StageStatistics:
    """Cumulative-through-stage MLE, pooled information, Z statistic, stop stage."""

    theta_hat: float
    info: float
    z: float
    stop_stage: int


@dataclass(frozen=True)
class TrialStatistics:
    """Per-stage statistics for an analysed trial plus the data they came from."""

    stage1: StageStatistics
    stage2: StageStatistics | None
    stop_stage: int
    data: TrialData = field(repr=False)

    @property
    def at_stop(self) -> StageStatistics:
        return self.stage1 if self.stop_stage == 1 else self.stage2

    @property
    def theta_hat(self) -> float:
        return self.at_stop.theta_hat

    @property
    def info1(self) -> float:
        return self.stage1.info

    @property
    def info2(self) -> float | None:
        return None if self.stage2 is None else self.stage2.info


_REPEATED = CiMethod.REPEATED


@dataclass(frozen=True)
class CiResult:
    """One interval: method tag, limits, optional point estimate, diagnostics.

    A point estimate falling outside the interval is flagged
    (``point_outside_interval``), never clamped.
    """

    method: CiMethod
    lower: float
    upper: float
    point: float | None = None
    flags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.flags:
            if not self.lower <= self.upper:
                raise ValidationError(
                    f"{self.method}: lower {self.lower} > upper {self.upper} without a failure flag"
                )
            if (
                self.point is not None
                and self.method is not _REPEATED
                and not (self.lower <= self.point <= self.upper)
            ):
                object.__setattr__(self, "flags", frozenset({"point_outside_interval"}))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def failed(self) -> bool:
        return bool(self.flags - {"point_outside_interval"})


def information(s_ctrl: int, s_trt: int, n_ctrl: int, n_trt: int) -> float:
    """Observed information from the pooled success rate.

    Raises DegenerateDataError when the pooled rate is 0 or 1.
    """
    total = s_ctrl + s_trt
    n = n_ctrl + n_trt
    if not 0 < total < n:
        raise DegenerateDataError(
            f"pooled successes {total}/{n}: information is undefined at rate 0 or 1"
        )
    pooled = total / n
    return 1.0 / (pooled * (1.0 - pooled) * (1.0 / n_ctrl + 1.0 / n_trt))


def stage_statistics(design: Design, data: TrialData, stage: int) -> StageStatistics:
    """Statistics on cumulative data through ``stage`` (1 or 2)."""
    data.validate_against(design)
    if stage == 1:
        s_ctrl, s_trt = data.s1_ctrl, data.s1_trt
        n_ctrl, n_trt = design.n1_ctrl, design.n1_trt
    elif stage == 2:
        if not data.has_stage2:
            raise ValidationError("stage-2 statistics requested but stage-2 counts are absent")
        s_ctrl, s_trt = data.s1_ctrl + data.s2_ctrl, data.s1_trt + data.s2_trt
        n_ctrl, n_trt = design.n2_ctrl, design.n2_trt
    else:
        raise ValidationError(f"stage must be 1 or 2, got {stage!r}")

    info = information(s_ctrl, s_trt, n_ctrl, n_trt)
    theta_hat = s_trt / n_trt - s_ctrl / n_ctrl
    z = theta_hat * math.sqrt(info)

    z1 = z if stage == 1 else stage_statistics(design, data, 1).z
    stop = 1 if z1 > design.e1 else 2
    return StageStatistics(theta_hat=theta_hat, info=info, z=z, stop_stage=stop)


def analyze_trial(design: Design, data: TrialData) -> TrialStatistics:
    """Derive all observed statistics and the realised stopping stage.

    Validates that stage-2 data are present exactly when the stage-1 statistic
    did not cross the efficacy boundary.
    """
    st1 = stage_statistics(design, data, 1)
    if st1.stop_stage == 1:
        if data.has_stage2:
            raise ValidationError(
                "stage-2 counts supplied but Z1 crosses the efficacy boundary (trial stops at stage 1)"
            )
        return TrialStatistics(stage1=st1, stage2=None, stop_stage=1, data=data)
    if not data.has_stage2:
        raise ValidationError("Z1 does not cross the boundary: stage-2 counts are required")
    st2 = stage_statistics(design, data, 2)
    return TrialStatistics(stage1=st1, stage2=st2, stop_stage=2, data=data)


def stop_probability(theta: float, design: Design, info1: float, stage: int = 1) -> float:
    """P(T = stage | theta) under the normal model with stage-1 information ``info1``.

    P(T=1) = 1 - Phi(e1 - theta*sqrt(I1)); P(T=2) is its complement.
    """
    if not math.isfinite(theta):
        raise ValidationError(f"theta must be finite, got {theta!r}")
    if info1 <= 0:
        raise ValidationError("info1 must be positive")
    from .numerics import norm_cdf

    c = design.e1 - theta * math.sqrt(info1)
    if stage == 1:
        return float(norm_cdf(-c))
    if stage == 2:
        return float(norm_cdf(c))
    raise ValidationError(f"stage must be 1 or 2, got {stage!r}")
