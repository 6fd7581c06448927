"""Single detection trials.

Times are 1-based: the statistic after the first observation has time 1. The
onset of a trial is the time of its first anomalous observation, so an
attack injected from trace row ``r`` has onset ``r + 1``.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import FusionMode
from oditids.cooperative.aggregator import NetworkOdit, fuse_paths
from oditids.detection.detector import first_alarm
from oditids.detection.model import OditModel


class StreamDetector(Protocol):
    def run_counts(self, counts: Sequence[NDArray[np.int64]]) -> NDArray[np.float64]: ...


class PathSource(Protocol):
    """Records one or more named statistic trajectories from a single replay."""

    names: tuple[str, ...]

    def paths(self, counts: Sequence[NDArray[np.int64]]) -> dict[str, NDArray[np.float64]]: ...


class SingleSource:
    def __init__(self, name: str, detector: StreamDetector) -> None:
        self.names = (name,)
        self.detector = detector

    def paths(self, counts: Sequence[NDArray[np.int64]]) -> dict[str, NDArray[np.float64]]:
        return {self.names[0]: self.detector.run_counts(counts)}


class OditSource:
    """Per-node ODIT statistics fused both cooperatively and independently."""

    def __init__(self, models: Sequence[OditModel], cooperative: str | None, single: str | None) -> None:
        self.network = NetworkOdit(models, h=1.0)
        self.fusions = {name: mode for name, mode in ((cooperative, FusionMode.SUM), (single, FusionMode.MAX)) if name}
        self.names = tuple(self.fusions)

    def paths(self, counts: Sequence[NDArray[np.int64]]) -> dict[str, NDArray[np.float64]]:
        node_stats = self.network.node_paths(counts).node_stats
        return {name: fuse_paths(node_stats, mode) for name, mode in self.fusions.items()}


@dataclass(frozen=True)
class TrialOutcome:
    alarm_time: int | None
    onset: int | None
    seed: int = 0

    @property
    def false_alarm(self) -> bool:
        return self.alarm_time is not None and (self.onset is None or self.alarm_time < self.onset)

    @property
    def delay(self) -> int | None:
        if self.alarm_time is None or self.onset is None or self.alarm_time < self.onset:
            return None
        return self.alarm_time - self.onset

    @property
    def detected(self) -> bool:
        return self.delay is not None


def classify(stats: ArrayLike, h: float, onset: int | None, seed: int = 0) -> TrialOutcome:
    return TrialOutcome(alarm_time=first_alarm(stats, h), onset=onset, seed=seed)


def run_trial(
    detector: StreamDetector,
    counts: Sequence[NDArray[np.int64]],
    onset: int | None,
    h: float,
    seed: int = 0,
) -> TrialOutcome:
    return classify(detector.run_counts(counts), h, onset, seed)


def first_crossings(stats: ArrayLike, thresholds: ArrayLike) -> NDArray[np.int64]:
    """First alarm time of one trajectory for every threshold, 0 where it never alarms."""
    stats = np.asarray(stats, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if stats.size == 0:
        return np.zeros(thresholds.size, dtype=np.int64)
    running = np.maximum.accumulate(stats)
    idx = np.searchsorted(running, thresholds, side="left")
    return np.where(idx < stats.size, idx + 1, 0).astype(np.int64)
