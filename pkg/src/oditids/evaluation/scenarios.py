"""Trial generators.

A scenario hands out reproducible attack-free and attacked trials keyed by a
trial seed. ``NetworkScenario`` runs the IoT simulator; ``GaussianScenario``
is a small continuous example with Gaussian nominal data and a uniform
anomaly, used to check detection delay and the evidence convergence.
"""

from __future__ import annotations
from dataclasses import dataclass
import logging
from typing import Any, Protocol

import numpy as np
from numpy.typing import NDArray

from oditids.config.config import AttackConfig, RunConfig
from oditids.simulation.generator import GroundTruth, Topology, generate_network, inject_attack

logger = logging.getLogger(__name__)


class Scenario(Protocol):
    name: str
    horizon: int
    post_onset_horizon: int

    def nominal(self, seed: int) -> list[NDArray[Any]]: ...

    def attacked(self, seed: int) -> AttackTrial: ...


@dataclass(frozen=True)
class AttackTrial:
    counts: list[NDArray[Any]]
    onset: int
    truth: GroundTruth | None = None


@dataclass(frozen=True)
class NetworkScenario:
    topology: Topology
    attack: AttackConfig
    horizon: int = 3600
    post_onset_horizon: int = 600
    name: str = "iot_network"

    @classmethod
    def from_config(cls, cfg: RunConfig) -> NetworkScenario:
        return cls(
            topology=Topology.from_config(cfg.topology),
            attack=cfg.attack,
            horizon=cfg.evaluation.horizon,
            post_onset_horizon=cfg.evaluation.post_onset_horizon,
        )

    def training(self, steps: int, seed: int) -> list[NDArray[np.int64]]:
        return generate_network(self.topology, steps, seed).counts()

    def attack_training(self, steps: int, seed: int) -> list[NDArray[np.int64]]:
        """Every device under attack from the first step, for fitting attack models."""
        spec = self.attack.model_copy(update={"onset": 0, "fraction": 1.0, "devices": None, "duration": None})
        return inject_attack(generate_network(self.topology, steps, seed), spec).counts()

    def nominal(self, seed: int) -> list[NDArray[np.int64]]:
        return generate_network(self.topology, self.horizon, seed).counts()

    def attacked(self, seed: int) -> AttackTrial:
        steps = self.attack.onset + self.post_onset_horizon
        # per-trial target selection unless explicitly pinned
        trace = inject_attack(generate_network(self.topology, steps, seed), self.attack)
        assert trace.ground_truth is not None
        return AttackTrial(counts=trace.counts(), onset=self.attack.onset + 1, truth=trace.ground_truth)


@dataclass(frozen=True)
class GaussianScenario:
    d: int = 2
    mean: float = 0.5
    sigma: float = 0.1
    onset: int = 6
    horizon: int = 50
    post_onset_horizon: int = 50
    name: str = "gaussian"
    anomaly_low: float = 0.0
    anomaly_high: float = 1.0

    def sample_nominal(self, rng: np.random.Generator, steps: int) -> NDArray[np.float64]:
        return rng.normal(self.mean, self.sigma, size=(steps, self.d))

    def sample_anomaly(self, rng: np.random.Generator, steps: int) -> NDArray[np.float64]:
        return rng.uniform(self.anomaly_low, self.anomaly_high, size=(steps, self.d))

    def training(self, steps: int, seed: int) -> list[NDArray[np.float64]]:
        return [self.sample_nominal(np.random.default_rng(seed), steps)]

    def nominal(self, seed: int) -> list[NDArray[np.float64]]:
        return [self.sample_nominal(np.random.default_rng(seed), self.horizon)]

    def attacked(self, seed: int) -> AttackTrial:
        rng = np.random.default_rng(seed)
        before = self.sample_nominal(rng, self.onset - 1)
        after = self.sample_anomaly(rng, self.post_onset_horizon)
        return AttackTrial(counts=[np.vstack([before, after])], onset=self.onset)

    def nominal_log_density(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.atleast_2d(x)
        z = (x - self.mean) / self.sigma
        return -0.5 * np.sum(z * z, axis=1) - self.d * np.log(self.sigma * np.sqrt(2.0 * np.pi))

    def limit_evidence(self, baseline_point: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Log-likelihood ratio the evidence converges to, for a uniform alternative
        whose density equals the nominal density at the baseline point."""
        return self.nominal_log_density(baseline_point)[0] - self.nominal_log_density(x)
