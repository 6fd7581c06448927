"""IoT packet-count simulator.

Each device alternates between an active and an idle state. At every
session boundary the state is redrawn independently (active with
``active_prob``), and within a session the count per step is a Normal draw
around the state mean, rounded half away from zero and clamped at 0.
Always-on devices have a single session spanning the whole trace.

Every device owns a random stream keyed by ``(node, device)``. Session
states and unit noise are drawn from it before any mean is applied, so
scaling the means for an attack leaves the random draws, the untouched
devices, and every pre-onset step exactly as they were.
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import AttackConfig, DeviceProfile, TopologyConfig
from oditids.detection.trace import RawTrace
from oditids.utils.errors import DataValidationError
from oditids.utils.seeding import STREAM_ATTACK_SELECTION, STREAM_DEVICE, rng_for, seed_sequence

logger = logging.getLogger(__name__)

AttackSpec = AttackConfig


def round_half_away(values: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(values >= 0, np.floor(values + 0.5), np.ceil(values - 0.5))


def generate_device(
    profile: DeviceProfile,
    steps: int,
    seed: int | np.random.SeedSequence,
    scale: float | ArrayLike = 1.0,
) -> NDArray[np.int64]:
    if steps < 1:
        raise DataValidationError(f"steps must be at least 1, got {steps}")

    rng = np.random.default_rng(seed)
    session_len = steps if profile.always_on else profile.session_len
    sessions = math.ceil(steps / session_len)
    states = rng.random(sessions) < profile.active_prob
    noise = rng.standard_normal(steps)

    active = np.repeat(states, session_len)[:steps]
    means = np.where(active, profile.active_mean, profile.idle_mean) * np.asarray(scale, dtype=np.float64)
    counts = round_half_away(means + profile.sigma * noise)
    return np.maximum(counts, 0.0).astype(np.int64)


@dataclass(frozen=True)
class Topology:
    nodes: tuple[tuple[DeviceProfile, ...], ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise DataValidationError("A topology needs at least one node")
        if any(len(devices) == 0 for devices in self.nodes):
            raise DataValidationError("Every node needs at least one device")

    @classmethod
    def from_config(cls, cfg: TopologyConfig) -> Topology:
        mix = [cfg.profiles[kind] for kind in cfg.device_mix]
        node = tuple(mix[j % len(mix)] for j in range(cfg.devices_per_node))
        return cls(nodes=tuple(node for _ in range(cfg.nodes)))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def device_ids(self, node: int) -> tuple[str, ...]:
        return tuple(f"{profile.kind}-{j:03d}" for j, profile in enumerate(self.nodes[node]))

    def devices(self) -> list[tuple[int, int]]:
        return [(n, j) for n, devices in enumerate(self.nodes) for j in range(len(devices))]


@dataclass(frozen=True)
class GroundTruth:
    attacked: tuple[tuple[int, int], ...]
    onset: int
    duration: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "attacked": [list(pair) for pair in self.attacked],
            "onset": self.onset,
            "duration": self.duration,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GroundTruth:
        return cls(
            attacked=tuple((int(n), int(j)) for n, j in data["attacked"]),
            onset=int(data["onset"]),
            duration=data.get("duration"),
        )

    def labels(self, topology: Topology) -> list[NDArray[np.bool_]]:
        out = [np.zeros(len(devices), dtype=bool) for devices in topology.nodes]
        for n, j in self.attacked:
            out[n][j] = True
        return out


@dataclass(frozen=True)
class TrafficTrace:
    nodes: tuple[RawTrace, ...]
    topology: Topology | None = None
    seed: int | None = None
    ground_truth: GroundTruth | None = field(default=None)

    @property
    def steps(self) -> int:
        return self.nodes[0].steps

    @property
    def n(self) -> int:
        return len(self.nodes)

    def counts(self) -> list[NDArray[np.int64]]:
        return [trace.counts for trace in self.nodes]


def _device_series(
    topology: Topology, steps: int, seed: int, node: int, device: int, scale: float | ArrayLike = 1.0
) -> NDArray[np.int64]:
    return generate_device(
        topology.nodes[node][device], steps, seed_sequence(seed, STREAM_DEVICE, node, device), scale
    )


def generate_network(topology: Topology, steps: int, seed: int, workers: int = 1) -> TrafficTrace:
    keys = topology.devices()

    def build(key: tuple[int, int]) -> NDArray[np.int64]:
        return _device_series(topology, steps, seed, *key)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(build, keys))
    else:
        series = [build(key) for key in keys]

    columns = dict(zip(keys, series))
    nodes = tuple(
        RawTrace(
            counts=np.column_stack([columns[(n, j)] for j in range(len(devices))]),
            device_ids=topology.device_ids(n),
        )
        for n, devices in enumerate(topology.nodes)
    )
    logger.debug(f"Generated {steps} steps for {len(keys)} devices on {topology.n} nodes")
    return TrafficTrace(nodes=nodes, topology=topology, seed=seed)


def select_targets(topology: Topology, spec: AttackSpec, seed: int) -> tuple[tuple[int, int], ...]:
    if spec.devices is not None:
        targets = sorted({(int(n), int(j)) for n, j in spec.devices})
        valid = set(topology.devices())
        unknown = [t for t in targets if t not in valid]
        if unknown:
            raise DataValidationError("Attack targets not in the topology", details={"unknown": unknown})
    else:
        devices = topology.devices()
        count = math.floor(spec.fraction * len(devices) + 0.5)
        if count == 0:
            raise DataValidationError(
                "Attack fraction selects no device",
                details={"fraction": spec.fraction, "devices": len(devices)},
            )
        selection_seed = spec.selection_seed if spec.selection_seed is not None else seed
        chosen = rng_for(selection_seed, STREAM_ATTACK_SELECTION).choice(len(devices), size=count, replace=False)
        targets = sorted(devices[i] for i in chosen)
    if not targets:
        raise DataValidationError("Attack selects no device")
    return tuple(targets)


def attack_scale(steps: int, spec: AttackSpec) -> NDArray[np.float64]:
    scale = np.ones(steps, dtype=np.float64)
    stop = steps if spec.duration is None else min(steps, spec.onset + spec.duration)
    scale[spec.onset : stop] = 1.0 + spec.rate_increase
    return scale


def inject_attack(trace: TrafficTrace, spec: AttackSpec) -> TrafficTrace:
    if trace.topology is None or trace.seed is None:
        raise DataValidationError("Attacks can only be injected into simulated traces")
    if not 0 <= spec.onset < trace.steps:
        raise DataValidationError(
            "Attack onset lies outside the trace", details={"onset": spec.onset, "steps": trace.steps}
        )

    topology, seed, steps = trace.topology, trace.seed, trace.steps
    targets = select_targets(topology, spec, seed)
    scale = attack_scale(steps, spec)

    counts = [c.copy() for c in trace.counts()]
    for n, j in targets:
        counts[n][:, j] = _device_series(topology, steps, seed, n, j, scale)

    logger.info(
        f"Injected +{spec.rate_increase:.0%} attack on {len(targets)} devices from t={spec.onset}"
    )
    return TrafficTrace(
        nodes=tuple(RawTrace(counts=c, device_ids=t.device_ids) for c, t in zip(counts, trace.nodes)),
        topology=topology,
        seed=seed,
        ground_truth=GroundTruth(attacked=targets, onset=spec.onset, duration=spec.duration),
    )
