"""Raw-rate filtering: a per-device packet-count threshold."""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterResult:
    alarm_time: int | None
    flagged: list[int] = field(default_factory=list)


def _check(counts: ArrayLike, thresholds: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    counts = np.asarray(counts, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if counts.ndim != 2:
        raise DataValidationError("Counts must be a 2-D (time x device) matrix")
    if thresholds.shape != (counts.shape[1],):
        raise DimensionMismatchError(
            "One threshold per device is required", expected=counts.shape[1], actual=thresholds.size
        )
    if np.any(thresholds <= 0):
        raise DataValidationError("Filter thresholds must be positive")
    return counts, thresholds


def filter_thresholds(nominal: ArrayLike, percentile: float = 99.9) -> NDArray[np.float64]:
    """Per-device thresholds at a percentile of attack-free counts."""
    nominal = np.asarray(nominal, dtype=np.float64)
    if nominal.ndim != 2 or nominal.shape[0] == 0:
        raise DataValidationError("Nominal counts must be a nonempty 2-D matrix")
    # a device idle at 0 would otherwise alarm on its first packet
    return np.maximum(np.percentile(nominal, percentile, axis=0), 0.5)


def filter_detector(counts: ArrayLike, thresholds: ArrayLike) -> FilterResult:
    counts, thresholds = _check(counts, thresholds)
    exceeded = counts > thresholds
    hits = np.flatnonzero(exceeded.any(axis=1))
    if hits.size == 0:
        return FilterResult(alarm_time=None)
    first = int(hits[0])
    return FilterResult(alarm_time=first + 1, flagged=np.flatnonzero(exceeded[first]).tolist())


def filter_scores(counts: ArrayLike, thresholds: ArrayLike, tau: int, alarm_time: int) -> NDArray[np.float64]:
    """Mean count over [tau, alarm_time] (1-based, inclusive) relative to each threshold."""
    counts, thresholds = _check(counts, thresholds)
    if not 1 <= tau <= alarm_time <= counts.shape[0]:
        raise DataValidationError(
            "Scoring window lies outside the trace",
            details={"tau": tau, "alarm": alarm_time, "steps": counts.shape[0]},
        )
    return counts[tau - 1 : alarm_time].mean(axis=0) / thresholds


class FilterNetworkDetector:
    """Network-wide filtering. The statistic is the largest count-to-threshold ratio."""

    def __init__(self, thresholds: Sequence[ArrayLike]) -> None:
        if not thresholds:
            raise DataValidationError("Filtering needs thresholds for at least one node")
        self.thresholds = [np.asarray(t, dtype=np.float64) for t in thresholds]

    @property
    def n(self) -> int:
        return len(self.thresholds)

    @classmethod
    def fit(cls, nominal: Sequence[ArrayLike], percentile: float = 99.9) -> FilterNetworkDetector:
        return cls([filter_thresholds(c, percentile) for c in nominal])

    def run_counts(self, counts: Sequence[NDArray[np.int64]]) -> NDArray[np.float64]:
        if len(counts) != self.n:
            raise DimensionMismatchError("Count node count does not match", expected=self.n, actual=len(counts))
        ratios = [(_check(c, t)[0] / t).max(axis=1) for c, t in zip(counts, self.thresholds)]
        return np.max(np.column_stack(ratios), axis=1)

    def scores(
        self, counts: Sequence[NDArray[np.int64]], tau: int, alarm_time: int
    ) -> list[NDArray[np.float64]]:
        return [filter_scores(c, t, tau, alarm_time) for c, t in zip(counts, self.thresholds)]
