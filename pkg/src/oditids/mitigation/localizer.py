"""Post-alarm localization of attacking nodes and devices.

After a global alarm at T the onset estimate tau is the step after the
global statistic last sat at zero. Over [tau, T] every node gets the mean of
its local statistic and every device the mean of its component of
y_t = x_t - (k-th nearest reference). Nodes whose mean reaches theta1 are
inspected, and within them devices whose mean reaches theta2 are blocked.
"""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import FusionMode, MitigationConfig
from oditids.cooperative.aggregator import NetworkOdit, NetworkTrajectory, fuse_paths
from oditids.utils.errors import DataValidationError

logger = logging.getLogger(__name__)


def _times_for(values: NDArray[Any], times: ArrayLike | None) -> NDArray[np.int64]:
    if times is None:
        return np.arange(1, len(values) + 1, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    if times.size != len(values):
        raise DataValidationError("History times and values differ in length")
    return times


def estimate_onset(
    stats: ArrayLike, times: ArrayLike | None = None, alarm_time: int | None = None
) -> int:
    stats = np.asarray(stats, dtype=np.float64)
    if stats.size == 0:
        raise DataValidationError("Cannot estimate the onset from an empty history")
    times = _times_for(stats, times)

    alarm_time = int(times[-1]) if alarm_time is None else int(alarm_time)
    upto = times <= alarm_time
    if not np.any(upto):
        raise DataValidationError(
            "History starts after the alarm time", details={"alarm_time": alarm_time}
        )
    stats, times = stats[upto], times[upto]

    zeros = np.flatnonzero(stats == 0.0)
    if zeros.size == 0:
        logger.warning(
            f"Statistic never reached zero in the retained window; using window start t={times[0]} as onset"
        )
        return int(times[0])
    return int(times[zeros[-1]]) + 1


def _window(times: NDArray[np.int64], tau: int, alarm_time: int) -> NDArray[np.bool_]:
    if tau > alarm_time:
        raise DataValidationError("Onset lies after the alarm", details={"tau": tau, "alarm": alarm_time})
    mask = (times >= tau) & (times <= alarm_time)
    if int(mask.sum()) != alarm_time - tau + 1:
        raise DataValidationError(
            "History does not cover the whole [tau, T] window",
            details={"tau": tau, "alarm": alarm_time, "covered": int(mask.sum())},
        )
    return mask


def node_score(stats: ArrayLike, tau: int, alarm_time: int, times: ArrayLike | None = None) -> float:
    stats = np.asarray(stats, dtype=np.float64)
    mask = _window(_times_for(stats, times), tau, alarm_time)
    return float(np.mean(stats[mask]))


def device_score(
    distances: ArrayLike,
    tau: int,
    alarm_time: int,
    times: ArrayLike | None = None,
    magnitude: bool = False,
) -> NDArray[np.float64]:
    distances = np.asarray(distances, dtype=np.float64)
    if distances.ndim == 1:
        distances = distances[:, None]
    mask = _window(_times_for(distances, times), tau, alarm_time)
    window = distances[mask]
    if magnitude:
        window = np.abs(window)
    return np.mean(window, axis=0)


@dataclass(frozen=True)
class MitigationInputs:
    """Recorded histories of a run up to (at least) the alarm."""

    times: NDArray[np.int64]
    node_stats: NDArray[np.float64]
    distances: tuple[NDArray[np.float64], ...]
    alarm_time: int
    global_stats: NDArray[np.float64] | None = None
    device_ids: tuple[tuple[str, ...], ...] | None = None

    @property
    def n(self) -> int:
        return int(self.node_stats.shape[1])

    def global_path(self) -> NDArray[np.float64]:
        if self.global_stats is not None:
            return self.global_stats
        return fuse_paths(self.node_stats, FusionMode.SUM)

    @classmethod
    def from_trajectory(
        cls,
        trajectory: NetworkTrajectory,
        alarm_time: int,
        device_ids: Sequence[Sequence[str]] | None = None,
    ) -> MitigationInputs:
        steps = min(trajectory.steps, alarm_time)
        return cls(
            times=np.arange(1, steps + 1, dtype=np.int64),
            node_stats=trajectory.node_stats[:steps],
            distances=tuple(y[:steps] for y in trajectory.distances),
            alarm_time=alarm_time,
            global_stats=trajectory.stats[:steps],
            device_ids=None if device_ids is None else tuple(tuple(ids) for ids in device_ids),
        )

    @classmethod
    def from_network(cls, network: NetworkOdit) -> MitigationInputs:
        """Histories retained in the nodes' ring buffers after an online run."""
        per_node = [node.state.statistics() for node in network.nodes]
        times = per_node[0][0]
        node_stats = np.column_stack([stats for _, stats in per_node])
        return cls(
            times=times,
            node_stats=node_stats,
            distances=tuple(node.state.distances() for node in network.nodes),
            alarm_time=network.t,
            global_stats=fuse_paths(node_stats, network.fusion),
        )


@dataclass
class MitigationReport:
    onset: int
    alarm: int
    node_scores: list[float]
    device_scores: list[list[float]]
    flagged_nodes: list[int]
    flagged_devices: list[tuple[int, int]]
    device_ids: list[list[str]] | None = field(default=None)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "onset": self.onset,
            "alarm": self.alarm,
            "node_scores": self.node_scores,
            "device_scores": self.device_scores,
            "flagged_nodes": self.flagged_nodes,
            "flagged_devices": [list(pair) for pair in self.flagged_devices],
        }
        if self.device_ids is not None:
            data["device_ids"] = self.device_ids
            data["blocked"] = [self.device_ids[n][j] for n, j in self.flagged_devices]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MitigationReport:
        return cls(
            onset=int(data["onset"]),
            alarm=int(data["alarm"]),
            node_scores=[float(v) for v in data["node_scores"]],
            device_scores=[[float(v) for v in row] for row in data["device_scores"]],
            flagged_nodes=[int(n) for n in data["flagged_nodes"]],
            flagged_devices=[(int(n), int(j)) for n, j in data["flagged_devices"]],
            device_ids=[[str(d) for d in ids] for ids in data["device_ids"]] if "device_ids" in data else None,
        )


def score(
    inputs: MitigationInputs, magnitude: bool = False, onset: int | None = None
) -> tuple[int, list[float], list[NDArray[np.float64]]]:
    """Onset estimate, node scores and device scores of a recorded run."""
    tau = onset if onset is not None else estimate_onset(inputs.global_path(), inputs.times, inputs.alarm_time)
    node_scores = [
        node_score(inputs.node_stats[:, n], tau, inputs.alarm_time, inputs.times) for n in range(inputs.n)
    ]
    device_scores = [
        device_score(inputs.distances[n], tau, inputs.alarm_time, inputs.times, magnitude=magnitude)
        for n in range(inputs.n)
    ]
    return tau, node_scores, device_scores


def identify(inputs: MitigationInputs, cfg: MitigationConfig, onset: int | None = None) -> MitigationReport:
    tau, node_scores, device_scores = score(inputs, magnitude=cfg.magnitude, onset=onset)

    flagged_nodes = [n for n, s in enumerate(node_scores) if s >= cfg.theta1]
    flagged_devices = [
        (n, int(j)) for n in flagged_nodes for j in np.flatnonzero(device_scores[n] >= cfg.theta2)
    ]
    logger.info(
        f"Mitigation over [{tau}, {inputs.alarm_time}]: "
        f"{len(flagged_nodes)} nodes and {len(flagged_devices)} devices flagged"
    )
    return MitigationReport(
        onset=tau,
        alarm=inputs.alarm_time,
        node_scores=node_scores,
        device_scores=[scores.tolist() for scores in device_scores],
        flagged_nodes=flagged_nodes,
        flagged_devices=flagged_devices,
        device_ids=None if inputs.device_ids is None else [list(ids) for ids in inputs.device_ids],
    )
