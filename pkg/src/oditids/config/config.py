from __future__ import annotations
from enum import Enum
import math
from pathlib import Path
from typing import Any
from pydantic import BaseModel, Field, model_validator

from oditids.utils.paths import find_path_collisions


class EvidenceMode(str, Enum):
    LOG_RATIO = "log_ratio"
    LEGACY_GEM = "legacy_gem"


class DimensionMode(str, Enum):
    # which d enters D_t when dimensions are masked
    ACTIVE = "active"
    MAX = "max"


class FusionMode(str, Enum):
    SUM = "sum"
    MAX = "max"


class DetectorConfig(BaseModel):
    k: int = Field(default=2, ge=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    m1: int = Field(default=500, ge=1)
    m2: int = Field(default=2000, ge=1)
    h: float = Field(default=10.0, gt=0.0)
    seed: int = 0
    evidence_mode: EvidenceMode = EvidenceMode.LOG_RATIO
    history_cap: int = Field(
        default=36_000,
        ge=1,
        description="Ring buffer length for mitigation history, 10x the expected detection horizon",
    )

    @model_validator(mode="after")
    def validate_neighbors(self) -> DetectorConfig:
        if self.k > self.m2:
            raise ValueError(f"k ({self.k}) must not exceed m2 ({self.m2})")
        return self


class LegacyGemConfig(BaseModel):
    n1: int = Field(default=500, ge=1)
    n2: int = Field(default=2000, ge=1)
    m_graph: int = Field(default=450, ge=1)
    k: int = Field(default=2, ge=1)
    s: int = Field(default=1, ge=1)
    gamma: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def validate_graph(self) -> LegacyGemConfig:
        if self.m_graph > self.n1:
            raise ValueError(f"m_graph ({self.m_graph}) must not exceed n1 ({self.n1})")
        if self.s > self.k:
            raise ValueError(f"s ({self.s}) must not exceed k ({self.k})")
        if self.k > self.n2:
            raise ValueError(f"k ({self.k}) must not exceed n2 ({self.n2})")
        return self


class MitigationConfig(BaseModel):
    theta1: float = Field(default=1.0, ge=0.0)
    theta2: float = Field(default=0.05, ge=0.0)
    magnitude: bool = Field(
        default=False,
        description="Score devices by |y| instead of the signed distance component",
    )

    @model_validator(mode="after")
    def validate_finite(self) -> MitigationConfig:
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2)):
            raise ValueError("theta1 and theta2 must be finite")
        return self


class DeviceProfile(BaseModel):
    model_config = {"frozen": True}

    kind: str
    active_prob: float = Field(ge=0.0, le=1.0)
    active_mean: float = Field(ge=0.0)
    idle_prob: float = Field(ge=0.0, le=1.0)
    idle_mean: float = Field(ge=0.0)
    session_len: int | None = Field(
        default=None,
        ge=1,
        description="Session length in steps, None for always-on devices",
    )
    sigma: float = Field(default=5.0, gt=0.0)

    @model_validator(mode="after")
    def validate_probabilities(self) -> DeviceProfile:
        if abs(self.active_prob + self.idle_prob - 1.0) > 1e-9:
            raise ValueError(
                f"active_prob + idle_prob must equal 1 for '{self.kind}'"
            )
        return self

    @property
    def always_on(self) -> bool:
        return self.session_len is None


# Nominal IoT device model; sessions of 5 s, 10 s, 40 s and 900 s.
DEFAULT_PROFILES: dict[str, DeviceProfile] = {
    "thermostat": DeviceProfile(
        kind="thermostat", active_prob=0.25, active_mean=25, idle_prob=0.75, idle_mean=5, session_len=5
    ),
    "smart_light": DeviceProfile(
        kind="smart_light", active_prob=0.05, active_mean=10, idle_prob=0.95, idle_mean=5, session_len=10
    ),
    "security_camera": DeviceProfile(
        kind="security_camera", active_prob=1.0, active_mean=80, idle_prob=0.0, idle_mean=0, session_len=None
    ),
    "smart_printer": DeviceProfile(
        kind="smart_printer", active_prob=0.05, active_mean=75, idle_prob=0.95, idle_mean=5, session_len=40
    ),
    "smart_tv": DeviceProfile(
        kind="smart_tv", active_prob=0.3, active_mean=120, idle_prob=0.7, idle_mean=10, session_len=900
    ),
}


class TopologyConfig(BaseModel):
    nodes: int = Field(default=10, ge=1)
    devices_per_node: int = Field(default=100, ge=1)
    device_mix: list[str] = Field(
        default_factory=lambda: list(DEFAULT_PROFILES),
        description="Device kinds assigned round-robin to the devices of every node",
    )
    profiles: dict[str, DeviceProfile] = Field(
        default_factory=lambda: dict(DEFAULT_PROFILES)
    )

    @model_validator(mode="after")
    def validate_mix(self) -> TopologyConfig:
        if not self.device_mix:
            raise ValueError("device_mix must name at least one device kind")
        missing = [kind for kind in self.device_mix if kind not in self.profiles]
        if missing:
            raise ValueError(f"Unknown device kinds in device_mix: {', '.join(missing)}")
        return self


class AttackConfig(BaseModel):
    onset: int = Field(default=100, ge=0)
    fraction: float = Field(default=0.10, gt=0.0, le=1.0)
    rate_increase: float = Field(default=0.10, ge=0.0)
    selection_seed: int | None = None
    devices: list[tuple[int, int]] | None = Field(
        default=None,
        description="Explicit (node, device index) targets, overrides fraction",
    )
    duration: int | None = Field(default=None, ge=1)


class SimulationConfig(BaseModel):
    steps: int = Field(default=3600, ge=1)
    workers: int = Field(default=1, ge=1)
    inject: bool = True


class CalibrationConfig(BaseModel):
    target_fpr: float = Field(default=0.05, gt=0.0, le=1.0)
    horizon: int = Field(default=3600, ge=1)
    trials: int = Field(default=200, ge=1)
    confidence: float = Field(default=0.95, ge=0.0, lt=1.0)
    grid_min: float = Field(default=1e-2, gt=0.0)
    grid_max: float = Field(default=1e4, gt=0.0)
    grid_points: int = Field(default=200, ge=2)

    @model_validator(mode="after")
    def validate_grid(self) -> CalibrationConfig:
        if self.grid_max <= self.grid_min:
            raise ValueError("grid_max must exceed grid_min")
        return self


class RenyiConfig(BaseModel):
    window_len: int = Field(default=30, ge=2)
    order: float = Field(default=2.0, gt=0.0)
    bins: int = Field(default=20, ge=2)
    range_factor: float = Field(
        default=1.5,
        gt=0.0,
        description="Histogram upper edge as a multiple of the nominal maximum aggregate count",
    )
    threshold: float = Field(default=0.5, gt=0.0)

    @model_validator(mode="after")
    def validate_order(self) -> RenyiConfig:
        if self.order == 1.0:
            raise ValueError("Renyi order must differ from 1, use KL divergence instead")
        return self


class DetectorKind(str, Enum):
    ODIT_COOPERATIVE = "odit_cooperative"
    ODIT_SINGLE = "odit_single"
    CUSUM = "cusum"
    GCUSUM = "gcusum"
    RENYI = "renyi"
    FILTER = "filter"


class EvaluationConfig(BaseModel):
    training_steps: int = Field(default=20_000, ge=2)
    horizon: int = Field(default=3600, ge=1, description="Attack-free horizon W for FPR")
    post_onset_horizon: int = Field(default=600, ge=1)
    trials: int = Field(default=200, ge=30)
    h_grid: list[float] | None = None
    h_points: int = Field(default=40, ge=2)
    detectors: list[DetectorKind] = Field(default_factory=lambda: list(DetectorKind))
    filter_percentile: float = Field(default=99.9, gt=0.0, lt=100.0)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_grid(self) -> EvaluationConfig:
        if self.h_grid is not None:
            if not self.h_grid:
                raise ValueError("h_grid must not be empty")
            if any(h <= 0 for h in self.h_grid):
                raise ValueError("h_grid values must be positive")
        return self


class BenchConfig(BaseModel):
    m2_grid: list[int] = Field(default_factory=lambda: [500, 1000, 2000])
    d_grid: list[int] = Field(default_factory=lambda: [25, 50, 100])
    reps: int = Field(default=200, ge=1)
    k: int = Field(default=2, ge=1)

    @model_validator(mode="after")
    def validate_grid(self) -> BenchConfig:
        if len(self.m2_grid) < 2 or len(self.d_grid) < 2:
            raise ValueError("bench grids need at least two points per axis")
        if any(m < 1 for m in self.m2_grid) or any(d < 1 for d in self.d_grid):
            raise ValueError("bench grid values must be positive")
        return self


class RunConfig(BaseModel):
    seed: int = 0
    out: Path = Path("out")
    cwd: Path = Field(default_factory=Path.cwd)
    log_level: str = "WARNING"

    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    legacy: LegacyGemConfig | None = None
    fusion: FusionMode = FusionMode.SUM
    mitigation: MitigationConfig = Field(default_factory=MitigationConfig)
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    renyi: RenyiConfig = Field(default_factory=RenyiConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    @property
    def out_dir(self) -> Path:
        if self.out.is_absolute():
            return self.out
        return self.cwd / self.out

    @property
    def legacy_gem(self) -> LegacyGemConfig | None:
        """Graph settings when the detector runs in legacy GEM mode, otherwise None."""
        if self.detector.evidence_mode is not EvidenceMode.LEGACY_GEM:
            return None
        return self.legacy or LegacyGemConfig()

    def validate_paths(self, inputs: list[Path], outputs: list[Path]) -> list[str]:
        errors = find_path_collisions(inputs, outputs)
        for path in inputs:
            if not path.exists():
                errors.append(f"Input file does not exist: {path}")
        return errors

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)
