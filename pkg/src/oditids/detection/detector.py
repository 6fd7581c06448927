from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import EvidenceMode
from oditids.detection.knn import kth_neighbors, neighbor_distances
from oditids.detection.model import OditModel
from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)


def neg_cap(d: int, baseline_stat: float) -> float:
    """Finite stand-in for log(0) evidence when a test point coincides with a reference."""
    return -10.0 * d * abs(math.log(baseline_stat)) - 10.0


@dataclass(frozen=True)
class EvidenceResult:
    d_t: float
    l_t: float
    y_t: NDArray[np.float64]
    neighbor: int = -1


@dataclass(frozen=True)
class EvidenceBatch:
    d_t: NDArray[np.float64]
    l_t: NDArray[np.float64]
    y_t: NDArray[np.float64]
    neighbors: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.d_t.size)

    def __getitem__(self, i: int) -> EvidenceResult:
        return EvidenceResult(
            d_t=float(self.d_t[i]),
            l_t=float(self.l_t[i]),
            y_t=self.y_t[i],
            neighbor=int(self.neighbors[i]),
        )


def log_ratio_evidence(
    l_t: NDArray[np.float64], baseline_stat: float, d: int
) -> NDArray[np.float64]:
    l_t = np.asarray(l_t, dtype=np.float64)
    out = np.full(l_t.shape, neg_cap(d, baseline_stat))
    positive = l_t > 0
    out[positive] = d * (np.log(l_t[positive]) - math.log(baseline_stat))
    return out


def evidence_from_points(
    model: OditModel,
    points: NDArray[np.float64],
    refs: NDArray[np.float64],
    baseline_stat: float,
    d_eff: int,
) -> EvidenceBatch:
    """Evidence of ``points`` against ``refs``; shared by the static and masked paths."""
    k = model.k
    distances, neighbors = kth_neighbors(points, refs, k)
    y_t = points - refs[neighbors]

    if model.mode is EvidenceMode.LEGACY_GEM:
        assert model.legacy is not None
        nearest = neighbor_distances(points, refs, k)
        l_t = np.sum(nearest[:, k - model.legacy.s : k] ** model.legacy.gamma, axis=1)
        d_t = l_t - baseline_stat
    else:
        l_t = distances
        d_t = log_ratio_evidence(l_t, baseline_stat, d_eff)

    return EvidenceBatch(d_t=d_t, l_t=l_t, y_t=y_t, neighbors=neighbors)


def _check_points(model: OditModel, x: ArrayLike) -> NDArray[np.float64]:
    points = np.asarray(x, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[1] != model.d:
        raise DimensionMismatchError(
            "Observation dimension does not match the model",
            expected=model.d,
            actual=int(points.shape[1]),
        )
    if model.baseline_stat <= 0:
        raise DataValidationError("Model baseline statistic must be positive")
    return points


def evidence_batch(model: OditModel, x: ArrayLike) -> EvidenceBatch:
    points = _check_points(model, x)
    return evidence_from_points(model, points, model.reference_set, model.baseline_stat, model.d)


def evidence(model: OditModel, x: ArrayLike) -> EvidenceResult:
    values = getattr(x, "values", x)
    return evidence_batch(model, np.asarray(values, dtype=np.float64)[None, :])[0]


@dataclass(frozen=True)
class HistoryEntry:
    t: int
    y: NDArray[np.float64]
    s: float


@dataclass
class DetectorState:
    """Running statistic of one node stream. Single owner, never shared between updaters."""

    history_cap: int = 36_000
    s: float = 0.0
    t: int = 0
    last_zero: int = 0
    history: deque[HistoryEntry] = field(default_factory=deque)

    def __post_init__(self) -> None:
        if not isinstance(self.history, deque) or self.history.maxlen != self.history_cap:
            self.history = deque(self.history, maxlen=self.history_cap)

    def reset(self) -> None:
        self.s = 0.0
        self.t = 0
        self.last_zero = 0
        self.history.clear()

    def statistics(self) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        times = np.fromiter((e.t for e in self.history), dtype=np.int64, count=len(self.history))
        stats = np.fromiter((e.s for e in self.history), dtype=np.float64, count=len(self.history))
        return times, stats

    def distances(self) -> NDArray[np.float64]:
        if not self.history:
            return np.empty((0, 0))
        return np.vstack([e.y for e in self.history])


def accumulate(s: float, increment: float) -> float:
    return max(s + increment, 0.0)


def update(state: DetectorState, ev: EvidenceResult) -> DetectorState:
    state.s = accumulate(state.s, ev.d_t)
    state.t += 1
    if state.s == 0.0:
        state.last_zero = state.t
    state.history.append(HistoryEntry(t=state.t, y=ev.y_t, s=state.s))
    return state


def check_alarm(state: DetectorState, h: float) -> bool:
    if h <= 0:
        raise DataValidationError(f"Threshold must be positive, got {h}")
    return state.s >= h


def cusum_path(increments: ArrayLike, s0: float = 0.0) -> NDArray[np.float64]:
    """s_t = max(s_{t-1} + D_t, 0) over a whole increment sequence."""
    increments = np.asarray(increments, dtype=np.float64)
    out = np.empty(increments.size, dtype=np.float64)
    s = s0
    for i, increment in enumerate(increments.tolist()):
        s = accumulate(s, increment)
        out[i] = s
    return out


@dataclass(frozen=True)
class NodeTrajectory:
    """Statistic, evidence and distance vectors of one node over a replayed stream."""

    stats: NDArray[np.float64]
    evidence: NDArray[np.float64]
    distances: NDArray[np.float64]


class OditDetector:
    def __init__(self, model: OditModel, history_cap: int | None = None) -> None:
        self.model = model
        self.state = DetectorState(history_cap=history_cap or model.config.history_cap)

    def reset(self) -> None:
        self.state.reset()

    def step(self, x: ArrayLike) -> EvidenceResult:
        ev = evidence(self.model, x)
        update(self.state, ev)
        return ev

    def alarmed(self, h: float | None = None) -> bool:
        return check_alarm(self.state, h if h is not None else self.model.config.h)

    def run(self, data: ArrayLike) -> NodeTrajectory:
        batch = evidence_batch(self.model, data)
        return NodeTrajectory(
            stats=cusum_path(batch.d_t),
            evidence=batch.d_t,
            distances=batch.y_t,
        )


def first_alarm(stats: ArrayLike, h: float) -> int | None:
    """1-based time of the first step whose statistic reaches h."""
    hits = np.flatnonzero(np.asarray(stats, dtype=np.float64) >= h)
    return int(hits[0]) + 1 if hits.size else None
