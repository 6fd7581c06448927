from __future__ import annotations
from dataclasses import dataclass
from fractions import Fraction
import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import DetectorConfig, EvidenceMode, LegacyGemConfig
from oditids.detection.knn import kth_neighbors, neighbor_distances
from oditids.detection.trace import NormalizationMap
from oditids.utils.errors import (
    DataValidationError,
    InsufficientDataError,
    SchemaVersionError,
    TrainingError,
)
from oditids.utils.seeding import STREAM_SPLIT, rng_for

if TYPE_CHECKING:
    from oditids.dynamic.regression import BaselineRegressor

logger = logging.getLogger(__name__)

MODEL_VERSION = 1


@dataclass(frozen=True)
class OditModel:
    """Trained detector for one node. Immutable, safe to share between readers."""

    reference_set: NDArray[np.float64]
    baseline_stat: float
    normalization: NormalizationMap
    config: DetectorConfig
    legacy: LegacyGemConfig | None = None
    baseline_point: NDArray[np.float64] | None = None
    dynamic: BaselineRegressor | None = None

    def __post_init__(self) -> None:
        refs = np.asarray(self.reference_set, dtype=np.float64)
        refs.setflags(write=False)
        object.__setattr__(self, "reference_set", refs)
        if self.baseline_point is not None:
            point = np.asarray(self.baseline_point, dtype=np.float64)
            point.setflags(write=False)
            object.__setattr__(self, "baseline_point", point)

    @property
    def d(self) -> int:
        return int(self.reference_set.shape[1])

    @property
    def mode(self) -> EvidenceMode:
        return self.config.evidence_mode

    @property
    def k(self) -> int:
        return self.legacy.k if self.legacy else self.config.k

    def with_dynamic(self, regressor: BaselineRegressor) -> OditModel:
        return OditModel(
            reference_set=self.reference_set,
            baseline_stat=self.baseline_stat,
            normalization=self.normalization,
            config=self.config,
            legacy=self.legacy,
            baseline_point=self.baseline_point,
            dynamic=regressor,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": MODEL_VERSION,
            "mode": self.mode.value,
            "d": self.d,
            "k": self.config.k,
            "alpha": self.config.alpha,
            "m1": self.config.m1,
            "m2": self.config.m2,
            "h": self.config.h,
            "history_cap": self.config.history_cap,
            "baseline_stat": self.baseline_stat,
            "normalization": self.normalization.to_list(),
            "reference_set": self.reference_set.tolist(),
            "baseline_point": None if self.baseline_point is None else self.baseline_point.tolist(),
            "legacy": self.legacy.model_dump() if self.legacy else None,
            "dynamic": self.dynamic.to_dict() if self.dynamic else None,
            "seed": self.config.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> OditModel:
        version = data.get("version")
        if version != MODEL_VERSION:
            raise SchemaVersionError(
                f"Unsupported model version {version}, expected {MODEL_VERSION}",
                details={"found": version, "expected": MODEL_VERSION},
            )

        config = DetectorConfig(
            k=data["k"],
            alpha=data["alpha"],
            m1=data["m1"],
            m2=data["m2"],
            h=data.get("h", DetectorConfig().h),
            history_cap=data.get("history_cap", DetectorConfig().history_cap),
            seed=data["seed"],
            evidence_mode=EvidenceMode(data["mode"]),
        )
        legacy = LegacyGemConfig(**data["legacy"]) if data.get("legacy") else None

        dynamic = None
        if data.get("dynamic"):
            from oditids.dynamic.regression import BaselineRegressor

            dynamic = BaselineRegressor.from_dict(data["dynamic"])

        refs = np.asarray(data["reference_set"], dtype=np.float64)
        if refs.ndim != 2 or refs.shape[1] != data["d"]:
            raise DataValidationError(
                "Reference set does not match the declared dimension",
                details={"d": data["d"], "shape": list(refs.shape)},
            )

        point = data.get("baseline_point")
        return cls(
            reference_set=refs,
            baseline_stat=float(data["baseline_stat"]),
            normalization=NormalizationMap(np.asarray(data["normalization"], dtype=np.float64)),
            config=config,
            legacy=legacy,
            baseline_point=None if point is None else np.asarray(point, dtype=np.float64),
            dynamic=dynamic,
        )


def _as_data(data: ArrayLike) -> NDArray[np.float64]:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DataValidationError("Training data must be a 2-D (time x device) matrix")
    return data


def split_training(
    data: ArrayLike, m1: int, m2: int, seed: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    data = _as_data(data)
    if data.shape[0] < m1 + m2:
        raise InsufficientDataError(
            f"Training needs m1 + m2 = {m1 + m2} points",
            required=m1 + m2,
            available=int(data.shape[0]),
        )

    perm = rng_for(seed, STREAM_SPLIT).permutation(data.shape[0])
    return data[perm[:m1]], data[perm[m1 : m1 + m2]]


def percentile_rank(m1: int, alpha: float) -> int:
    """1-based ascending rank of the (1 - alpha) order statistic among m1 values."""
    # alpha as written in the config, so 0.05 * 100 stays exactly 5
    exact = (1 - Fraction(str(float(alpha)))) * m1
    return min(m1, math.floor(exact) + 1)


def _degenerate_baseline() -> TrainingError:
    return TrainingError(
        "Baseline statistic is 0: the training data contain too many duplicated points. "
        "Add a small jitter to the observations or deduplicate them before training."
    )


def _identity_normalization(d: int) -> NormalizationMap:
    return NormalizationMap(np.ones(d, dtype=np.float64))


def train(
    data: ArrayLike,
    cfg: DetectorConfig,
    normalization: NormalizationMap | None = None,
) -> OditModel:
    data = _as_data(data)
    if cfg.k > cfg.m2:
        raise DataValidationError(f"k ({cfg.k}) must not exceed m2 ({cfg.m2})")

    part1, part2 = split_training(data, cfg.m1, cfg.m2, cfg.seed)
    distances, _ = kth_neighbors(part1, part2, cfg.k)

    rank = percentile_rank(cfg.m1, cfg.alpha)
    order = np.argsort(distances, kind="stable")
    chosen = order[rank - 1]
    baseline = float(distances[chosen])
    if baseline <= 0.0:
        raise _degenerate_baseline()

    logger.debug(
        f"Trained model: d={data.shape[1]}, m1={cfg.m1}, m2={cfg.m2}, rank={rank}, baseline={baseline:.6g}"
    )
    return OditModel(
        reference_set=part2,
        baseline_stat=baseline,
        normalization=normalization or _identity_normalization(data.shape[1]),
        config=cfg.model_copy(update={"evidence_mode": EvidenceMode.LOG_RATIO}),
        baseline_point=part1[chosen],
    )


def total_edge_length(points: ArrayLike, refs: ArrayLike, cfg: LegacyGemConfig) -> NDArray[np.float64]:
    """Sum of gamma-powered distances to the (k-s+1)..k-th neighbors of each point."""
    nearest = neighbor_distances(points, refs, cfg.k)
    return np.sum(nearest[:, cfg.k - cfg.s : cfg.k] ** cfg.gamma, axis=1)


def train_legacy(
    data: ArrayLike,
    cfg: LegacyGemConfig,
    seed: int = 0,
    normalization: NormalizationMap | None = None,
    base: DetectorConfig | None = None,
) -> OditModel:
    data = _as_data(data)
    part1, part2 = split_training(data, cfg.n1, cfg.n2, seed)

    lengths = total_edge_length(part1, part2, cfg)
    order = np.argsort(lengths, kind="stable")
    # the M-point graph keeps the smallest edge lengths; its largest is the boundary
    boundary = order[cfg.m_graph - 1]
    baseline = float(lengths[boundary])
    if baseline <= 0.0:
        raise _degenerate_baseline()

    base = base or DetectorConfig(k=cfg.k, m1=cfg.n1, m2=cfg.n2)
    config = base.model_copy(
        update={
            "k": cfg.k,
            "m1": cfg.n1,
            "m2": cfg.n2,
            "seed": seed,
            "evidence_mode": EvidenceMode.LEGACY_GEM,
        }
    )
    return OditModel(
        reference_set=part2,
        baseline_stat=baseline,
        normalization=normalization or _identity_normalization(data.shape[1]),
        config=config,
        legacy=cfg,
        baseline_point=part1[boundary],
    )
