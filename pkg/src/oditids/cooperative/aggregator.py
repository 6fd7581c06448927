"""Cooperative detection across nodes.

All nodes advance one step in lockstep, then the center fuses their local
statistics. With ``FusionMode.SUM`` the global statistic is the sum of the
local ones; ``FusionMode.MAX`` models independent nodes, where the network
alarms as soon as any single node does.
"""

from __future__ import annotations
from dataclasses import dataclass
import logging
import math
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import DetectorConfig, FusionMode, LegacyGemConfig
from oditids.detection.detector import NodeTrajectory, OditDetector
from oditids.detection.events import DetectionEvent
from oditids.detection.model import OditModel, train, train_legacy
from oditids.detection.trace import RawTrace, build_normalization, normalize
from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeStatistics:
    s: NDArray[np.float64]
    t: int = 0

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise DataValidationError("Node statistics must be a nonempty vector")
        if np.any(s < 0):
            raise DataValidationError("Node statistics must be nonnegative")
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return int(self.s.size)


@dataclass(frozen=True)
class GlobalAlarm:
    alarmed: bool
    statistic: float
    alarm_time: int | None = None
    contributing: tuple[float, ...] = ()


def aggregate(stats: NodeStatistics | ArrayLike, fusion: FusionMode = FusionMode.SUM) -> float:
    if not isinstance(stats, NodeStatistics):
        stats = NodeStatistics(np.asarray(stats, dtype=np.float64))
    if fusion is FusionMode.MAX:
        return float(np.max(stats.s))
    # correctly rounded, so independent of node order
    return math.fsum(stats.s.tolist())


def global_step(
    stats: NodeStatistics, h: float, fusion: FusionMode = FusionMode.SUM
) -> GlobalAlarm:
    if h <= 0:
        raise DataValidationError(f"Threshold must be positive, got {h}")
    total = aggregate(stats, fusion)
    if total >= h:
        return GlobalAlarm(
            alarmed=True,
            statistic=total,
            alarm_time=stats.t,
            contributing=tuple(float(v) for v in stats.s),
        )
    return GlobalAlarm(alarmed=False, statistic=total)


def fuse_paths(node_stats: NDArray[np.float64], fusion: FusionMode) -> NDArray[np.float64]:
    """Global statistic per step from a (time, node) matrix of local statistics."""
    if fusion is FusionMode.MAX:
        return node_stats.max(axis=1)
    return np.array([aggregate(NodeStatistics(row), fusion) for row in node_stats])


@dataclass(frozen=True)
class NetworkTrajectory:
    stats: NDArray[np.float64]
    node_stats: NDArray[np.float64]
    distances: tuple[NDArray[np.float64], ...]

    @property
    def steps(self) -> int:
        return int(self.stats.size)


class NetworkOdit:
    """ODIT detectors for every node plus the fusion center."""

    def __init__(
        self,
        models: Sequence[OditModel],
        h: float,
        fusion: FusionMode = FusionMode.SUM,
        history_cap: int | None = None,
    ) -> None:
        if not models:
            raise DataValidationError("A network needs at least one node model")
        if h <= 0:
            raise DataValidationError(f"Threshold must be positive, got {h}")
        self.models = list(models)
        self.h = h
        self.fusion = fusion
        self.nodes = [OditDetector(m, history_cap=history_cap) for m in self.models]
        self.t = 0

    @property
    def n(self) -> int:
        return len(self.nodes)

    def reset(self) -> None:
        self.t = 0
        for node in self.nodes:
            node.reset()

    def normalize(self, traces: Sequence[RawTrace]) -> list[NDArray[np.float64]]:
        if len(traces) != self.n:
            raise DimensionMismatchError(
                "Trace node count does not match the model bundle",
                expected=self.n,
                actual=len(traces),
            )
        return [normalize(trace, model.normalization) for trace, model in zip(traces, self.models)]

    def step(self, observations: Sequence[ArrayLike]) -> GlobalAlarm:
        # per-node updates are independent; the fusion below is the barrier
        for node, x in zip(self.nodes, observations):
            node.step(x)
        self.t += 1
        stats = NodeStatistics(np.array([node.state.s for node in self.nodes]), t=self.t)
        return global_step(stats, self.h, self.fusion)

    def stream(
        self, observations: Sequence[NDArray[np.float64]], stop_at_alarm: bool = True
    ) -> Iterator[DetectionEvent]:
        steps = min(int(obs.shape[0]) for obs in observations)
        for i in range(steps):
            result = self.step([obs[i] for obs in observations])
            node_stats = [node.state.s for node in self.nodes]
            yield DetectionEvent.step(self.t, result.statistic, node_stats)
            if result.alarmed:
                logger.info(f"Global alarm at t={self.t} (statistic {result.statistic:.4g})")
                yield DetectionEvent.alarm(self.t, result.statistic, list(result.contributing))
                if stop_at_alarm:
                    return
        yield DetectionEvent.end(self.t)

    def run(self, observations: Sequence[NDArray[np.float64]]) -> NetworkTrajectory:
        """Replay normalized observations without stopping, from a fresh statistic."""
        paths: list[NodeTrajectory] = [node.run(obs) for node, obs in zip(self.nodes, observations)]
        node_stats = np.column_stack([p.stats for p in paths])
        return NetworkTrajectory(
            stats=fuse_paths(node_stats, self.fusion),
            node_stats=node_stats,
            distances=tuple(p.distances for p in paths),
        )

    def run_counts(self, counts: Sequence[NDArray[np.int64]]) -> NDArray[np.float64]:
        return self.node_paths(counts).stats

    def node_paths(self, counts: Sequence[NDArray[np.int64]]) -> NetworkTrajectory:
        if len(counts) != self.n:
            raise DimensionMismatchError(
                "Trace node count does not match the model bundle", expected=self.n, actual=len(counts)
            )
        observations = []
        for c, m in zip(counts, self.models):
            c = np.asarray(c, dtype=np.float64)
            if c.ndim != 2 or c.shape[1] != m.d:
                raise DimensionMismatchError(
                    "Trace width does not match the node model", expected=m.d, actual=c.shape[-1]
                )
            observations.append(c / m.normalization.maxima)
        return self.run(observations)


def train_network(
    traces: Sequence[RawTrace],
    cfg: DetectorConfig,
    legacy: LegacyGemConfig | None = None,
) -> list[OditModel]:
    """One model per node, each on its own normalized training trace."""
    if not traces:
        raise DataValidationError("Training needs at least one node trace")
    models = []
    for n, trace in enumerate(traces):
        norm = build_normalization(trace)
        data = normalize(trace, norm)
        if legacy is not None:
            models.append(train_legacy(data, legacy, seed=cfg.seed, normalization=norm, base=cfg))
        else:
            models.append(train(data, cfg, normalization=norm))
        logger.debug(f"Node {n}: baseline statistic {models[-1].baseline_stat:.6g}")
    return models
