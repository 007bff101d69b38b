from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class WpdmError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(WpdmError, ValueError):
    pass


class FilterDesignError(WpdmError, ValueError):
    pass


class TreeError(WpdmError, ValueError):
    pass


class WaveformError(WpdmError, ValueError):
    pass


class ChannelError(WpdmError, ValueError):
    pass


class DegenerateChannelError(ChannelError):
    pass


class FusionError(WpdmError, ValueError):
    pass


class MetricsError(WpdmError, ValueError):
    pass


class TrialError(WpdmError):
    def __init__(self, trial_id: int, snr_db: float, noise_kind: str, cause: Exception):
        self.trial_id = trial_id
        self.snr_db = snr_db
        self.noise_kind = noise_kind
        self.cause = cause
        super().__init__(
            f"trial {trial_id} (noise={noise_kind}, snr={snr_db} dB) failed: {cause}"
        )


class ResultsWriteError(WpdmError, OSError):
    def __init__(self, path: str, cause: Exception):
        self.path = path
        super().__init__(f"could not write {path}: {cause}")


class ScalingKind(str, Enum):
    HAAR = "haar"
    SHANNON = "shannon"
    SPLINE = "spline"


class DetectorKind(str, Enum):
    MF = "mf"
    ZF = "zf"
    MRC = "mrc"  # no-WPDM benchmark


class NoiseKind(str, Enum):
    CLASS_A = "class_a"
    BERNOULLI_GAUSSIAN = "bernoulli_gaussian"
    GAUSSIAN = "gaussian"


class Hypothesis(int, Enum):
    H0 = 0
    H1 = 1


BENCHMARK_SCALING = "none"


def variant_key(scaling: str, detector: str) -> str:
    return f"{scaling}/{detector}"


def split_variant(key: str) -> tuple[str, str]:
    scaling, detector = key.split("/", 1)
    return scaling, detector


class NoiseModelSpec(BaseModel):
    """Gaussian background plus an impulsive component.

    ``gaussian_variance`` is the background variance; the impulsive variance
    follows from the ratio ``gamma_ratio = gaussian / impulsive``.
    """

    model_config = ConfigDict(frozen=True)

    kind: NoiseKind = NoiseKind.CLASS_A
    p_imp: float = Field(0.3, ge=0.0, le=1.0)
    gamma_ratio: float = Field(0.25, gt=0.0)
    impulse_index: float = Field(0.1, gt=0.0)
    bernoulli_p: float = Field(0.3, gt=0.0, lt=1.0)
    occurrence: float = Field(1.0, gt=0.0)
    gaussian_variance: float = Field(1.0, ge=0.0)
    sensors: int = Field(8, ge=1)

    @property
    def impulsive_variance(self) -> float:
        return self.gaussian_variance / self.gamma_ratio

    def with_gaussian_variance(self, variance: float) -> "NoiseModelSpec":
        return self.model_copy(update={"gaussian_variance": variance})


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # network dimensions
    groups: int = Field(4, ge=2)
    sensors_per_group: int = Field(8, ge=1)
    antennas: int = Field(64, ge=1)

    # variants evaluated on common random numbers
    scaling_kinds: list[ScalingKind] = Field(
        default_factory=lambda: [ScalingKind.HAAR, ScalingKind.SHANNON, ScalingKind.SPLINE]
    )
    detectors: list[DetectorKind] = Field(
        default_factory=lambda: [DetectorKind.MF, DetectorKind.ZF]
    )
    include_benchmark: bool = True

    # noise
    noise_kinds: list[NoiseKind] = Field(default_factory=lambda: [NoiseKind.CLASS_A])
    p_imp: float = Field(0.3, ge=0.0, le=1.0)
    gamma_ratio: float = Field(0.25, gt=0.0)
    impulse_index: float = Field(0.1, gt=0.0)
    bernoulli_p: float = Field(0.3, gt=0.0, lt=1.0)
    occurrence: float = Field(1.0, gt=0.0)
    noiseless: bool = False

    # operating points
    snr_grid_db: list[float] = Field(default_factory=lambda: [10.0])
    trials_per_point: int = Field(1000, ge=1)
    threshold_points: int = Field(201, ge=2)

    # local sensors
    p_detect: float = Field(0.5, ge=0.0, le=1.0)
    p_false_alarm: float = Field(0.05, ge=0.0, le=1.0)

    # geometry and large-scale fading
    radius_min: float = Field(100.0, gt=0.0)
    radius_max: float = Field(1000.0, gt=0.0)
    cluster_width: float = Field(50.0, gt=0.0)
    cluster_height: float = Field(100.0, gt=0.0)
    pathloss_exponent: float = Field(2.0, ge=0.0)
    shadowing_mean_db: float = 4.0
    shadowing_std_db: float = Field(2.0, ge=0.0)
    transmit_power: Optional[float] = Field(None, gt=0.0)

    # waveform
    filter_length: int = Field(14, ge=2)
    vanishing_moments: int = Field(2, ge=1)
    bandwidth: float = Field(math.sqrt(2.0), gt=0.0)
    symbol_interval: float = Field(1e-3, gt=0.0)
    oversampling: int = Field(8, ge=1)
    timing_offset: float = 0.0
    shannon_extent: float = Field(16.0, gt=0.0)
    tol_orth: float = Field(0.05, gt=0.0)
    tol_prototype: float = Field(0.075, gt=0.0)

    simulate_all_groups: bool = False
    master_seed: int = Field(20240601, ge=0, le=2**64 - 1)

    @field_validator("scaling_kinds", "detectors", "noise_kinds", "snr_grid_db")
    @classmethod
    def _non_empty(cls, value: list) -> list:
        if not value:
            raise ValueError("must list at least one entry")
        if len(set(value)) != len(value):
            raise ValueError("entries must be unique")
        return value

    @field_validator("detectors")
    @classmethod
    def _wpdm_detectors(cls, value: list[DetectorKind]) -> list[DetectorKind]:
        if DetectorKind.MRC in value:
            raise ValueError("the MRC benchmark is enabled with include_benchmark, not as a detector")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "ScenarioConfig":
        if self.radius_min > self.radius_max:
            raise ValueError("radius_min must not exceed radius_max")
        if self.p_false_alarm > self.p_detect:
            raise ValueError("p_false_alarm must not exceed p_detect")
        return self

    @property
    def power(self) -> float:
        """Transmit power scale; 1/sqrt(N) unless set explicitly."""
        if self.transmit_power is not None:
            return self.transmit_power
        return 1.0 / math.sqrt(self.antennas)

    def noise_spec(self, kind: NoiseKind) -> NoiseModelSpec:
        return NoiseModelSpec(
            kind=kind,
            p_imp=self.p_imp,
            gamma_ratio=self.gamma_ratio,
            impulse_index=self.impulse_index,
            bernoulli_p=self.bernoulli_p,
            occurrence=self.occurrence,
            gaussian_variance=1.0,
            sensors=self.sensors_per_group,
        )

    def variant_keys(self) -> list[str]:
        keys = [
            variant_key(s.value, d.value) for s in self.scaling_kinds for d in self.detectors
        ]
        if self.include_benchmark:
            keys.append(variant_key(BENCHMARK_SCALING, DetectorKind.MRC.value))
        return keys

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


class TrialRecord(BaseModel):
    trial_id: int
    group: int
    hypothesis: Hypothesis
    noise_kind: NoiseKind
    snr_db: float
    decisions: list[int]
    llr: dict[str, float] = Field(default_factory=dict)
    decision: dict[str, int] = Field(default_factory=dict)
    analytic_pf0: dict[str, float] = Field(default_factory=dict)


class CurveLabel(BaseModel):
    scaling: str
    detector: str
    noise_kind: str
    p_imp: float
    snr_db: float


class RocPoint(CurveLabel):
    threshold: float
    pd0: float = Field(ge=0.0, le=1.0)
    pf0: float = Field(ge=0.0, le=1.0)
    pd0_ci: float
    pf0_ci: float
    trials_h1: int
    trials_h0: int


class SnrSweepRow(CurveLabel):
    pfd: float = Field(ge=0.0, le=1.0)
    pfd_ci: float
    trials: int
    errors: int = 0


class FilterDiagnostics(BaseModel):
    filter_length: int
    vanishing_moments: int
    bandwidth: float
    delay: float
    regularity: int
    groups: int
    levels: int
    prototype_residuals: list[float]
    prototype_residual: float
    leaf_cross_correlation_max: float
    tol_orth: float
    tol_prototype: float
    within_tolerance: bool


class NoiseCalibration(BaseModel):
    kind: NoiseKind
    p_imp: float
    samples: int
    expected_variance: float
    empirical_variance: float
    relative_error: float
    excess_kurtosis: float
    impulsive_fraction: float
    tolerance: float
    within_tolerance: bool


class AnalyticPoint(BaseModel):
    variant: str
    noise_kind: str
    snr_db: float
    pf0: float
    label: str = "analytic"


class ReproductionCheck(BaseModel):
    name: str
    noise_kind: str
    snr_db: Optional[float] = None
    status: str
    detail: dict[str, float | str] = Field(default_factory=dict)


class Diagnostics(BaseModel):
    config_hash: str
    seed: int
    filters: FilterDiagnostics
    waveform_gains: dict[str, list[float]] = Field(default_factory=dict)
    fusion_floor: Optional[float] = None
    noise_calibration: list[NoiseCalibration] = Field(default_factory=list)
    analytic_pf0: list[AnalyticPoint] = Field(default_factory=list)
    reproduction: list[ReproductionCheck] = Field(default_factory=list)


class ResultSet(BaseModel):
    config: ScenarioConfig
    config_hash: str
    seed: int
    roc: list[RocPoint] = Field(default_factory=list)
    pfd_vs_snr: list[SnrSweepRow] = Field(default_factory=list)
    diagnostics: Optional[Diagnostics] = None
    trials_executed: int = 0
    partial: bool = False
