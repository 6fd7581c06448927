from __future__ import annotations
from dataclasses import dataclass
import logging
from typing import Any, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import DetectorConfig
from oditids.detection.model import train
from oditids.dynamic.masking import ActiveMask, ApplicationProfile
from oditids.utils.errors import DataValidationError, InsufficientDataError, TrainingError

logger = logging.getLogger(__name__)


class BaselineApproximator(Protocol):
    def predict(self, counts: ArrayLike) -> float: ...


def _collinear_inputs(design: NDArray[np.float64], names: Sequence[str]) -> list[str]:
    collinear: list[str] = []
    rank = 0
    for j in range(design.shape[1]):
        new_rank = np.linalg.matrix_rank(design[:, : j + 1])
        if new_rank == rank:
            collinear.append(names[j])
        rank = new_rank
    return collinear


@dataclass(frozen=True)
class BaselineRegressor:
    """Affine least-squares map from per-application device counts to the baseline statistic."""

    profile: ApplicationProfile
    counts: NDArray[np.float64]
    targets: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    residual_std: float

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> NDArray[np.float64]:
        return self.coefficients[1:]

    @property
    def floor(self) -> float:
        return 0.5 * float(self.targets.min())

    def predict(self, counts: ArrayLike) -> float:
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != (self.profile.p,):
            raise DataValidationError(
                "One count per application is required",
                details={"expected": self.profile.p, "actual": counts.size},
            )
        lo, hi = self.counts.min(axis=0), self.counts.max(axis=0)
        if np.any(counts < lo) or np.any(counts > hi):
            logger.warning(f"Extrapolating the baseline statistic outside the sampled counts: {counts.tolist()}")

        value = self.intercept + float(self.slopes @ counts)
        return max(value, self.floor)

    def to_dict(self) -> dict[str, Any]:
        return {
            "applications": self.profile.to_dict(),
            "samples": [
                {"counts": c.tolist(), "baseline_stat": float(t)} for c, t in zip(self.counts, self.targets)
            ],
            "coefficients": self.coefficients.tolist(),
            "residual_std": self.residual_std,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BaselineRegressor:
        samples = data["samples"]
        return cls(
            profile=ApplicationProfile.from_dict(data["applications"]),
            counts=np.asarray([s["counts"] for s in samples], dtype=np.float64),
            targets=np.asarray([s["baseline_stat"] for s in samples], dtype=np.float64),
            coefficients=np.asarray(data["coefficients"], dtype=np.float64),
            residual_std=float(data["residual_std"]),
        )


def fit_baseline_regressor(
    samples: Sequence[tuple[ArrayLike, float]], profile: ApplicationProfile
) -> BaselineRegressor:
    p = profile.p
    if len(samples) < p + 1:
        raise InsufficientDataError(
            f"An affine fit over {p} applications needs at least {p + 1} samples",
            required=p + 1,
            available=len(samples),
        )
    counts = np.asarray([s[0] for s in samples], dtype=np.float64)
    targets = np.asarray([s[1] for s in samples], dtype=np.float64)
    if counts.shape != (len(samples), p):
        raise DataValidationError("Every sample needs one count per application")
    if np.any(targets <= 0):
        raise DataValidationError("Baseline statistics must be positive")

    design = np.column_stack([np.ones(len(samples)), counts])
    if np.linalg.matrix_rank(design) < p + 1:
        names = ["intercept", *profile.applications]
        collinear = _collinear_inputs(design, names)
        raise TrainingError(
            f"Sample counts are rank deficient; collinear inputs: {', '.join(collinear)}",
            details={"collinear": collinear},
        )

    coefficients, *_ = np.linalg.lstsq(design, targets, rcond=None)
    residuals = targets - design @ coefficients
    residual_std = float(np.sqrt(np.mean(residuals**2)))
    logger.debug(f"Baseline regressor fit on {len(samples)} samples, residual std {residual_std:.3g}")
    return BaselineRegressor(
        profile=profile,
        counts=counts,
        targets=targets,
        coefficients=coefficients,
        residual_std=residual_std,
    )


class EstimatorBaseline:
    """Adapter for any fitted scikit-learn style regressor (e.g. a Gaussian process)."""

    def __init__(self, estimator: Any, floor: float) -> None:
        self.estimator = estimator
        self.floor = floor

    @classmethod
    def fit(cls, estimator: Any, samples: Sequence[tuple[ArrayLike, float]]) -> EstimatorBaseline:
        counts = np.asarray([s[0] for s in samples], dtype=np.float64)
        targets = np.asarray([s[1] for s in samples], dtype=np.float64)
        estimator.fit(counts, targets)
        return cls(estimator, floor=0.5 * float(targets.min()))

    def predict(self, counts: ArrayLike) -> float:
        value = float(self.estimator.predict(np.asarray(counts, dtype=np.float64)[None, :])[0])
        return max(value, self.floor)


def collect_baseline_samples(
    data: ArrayLike,
    profile: ApplicationProfile,
    combinations: Sequence[Sequence[int]],
    cfg: DetectorConfig,
) -> list[tuple[NDArray[np.int64], float]]:
    """Exact baseline statistic for each application combination of the maximal training set."""
    data = np.asarray(data, dtype=np.float64)
    samples: list[tuple[NDArray[np.int64], float]] = []
    for combo in combinations:
        mask = ActiveMask.for_counts(profile, combo)
        model = train(data[:, mask.active], cfg)
        samples.append((mask.counts, model.baseline_stat))
    return samples
