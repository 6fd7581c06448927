from __future__ import annotations
from pathlib import Path

import numpy as np
import pytest

from oditids.config import loader
from oditids.config.config import DetectorConfig, TopologyConfig
from oditids.cooperative.aggregator import train_network
from oditids.detection.model import OditModel, train
from oditids.simulation.generator import Topology, TrafficTrace, generate_network


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """Keep the user's config file and ODITIDS_* variables out of every test."""
    monkeypatch.setattr(loader, "get_system_config_path", lambda: tmp_path / "no-user-config.toml")
    monkeypatch.delenv("ODITIDS_SEED", raising=False)
    monkeypatch.delenv("ODITIDS_LOG_LEVEL", raising=False)


def gaussian_points(seed: int, n: int, d: int = 2, mean: float = 0.5, sigma: float = 0.1) -> np.ndarray:
    return np.random.default_rng(seed).normal(mean, sigma, size=(n, d))


@pytest.fixture
def small_cfg() -> DetectorConfig:
    return DetectorConfig(k=2, alpha=0.05, m1=50, m2=200, h=5.0, seed=3)


@pytest.fixture
def gaussian_model(small_cfg: DetectorConfig) -> OditModel:
    return train(gaussian_points(11, 400), small_cfg)


@pytest.fixture
def topology() -> Topology:
    return Topology.from_config(TopologyConfig(nodes=2, devices_per_node=5))


@pytest.fixture
def training_trace(topology: Topology) -> TrafficTrace:
    return generate_network(topology, 500, seed=21)


@pytest.fixture
def network_cfg() -> DetectorConfig:
    return DetectorConfig(k=2, alpha=0.05, m1=100, m2=300, h=10.0, seed=5)


@pytest.fixture
def network_models(training_trace: TrafficTrace, network_cfg: DetectorConfig) -> list[OditModel]:
    return train_network(list(training_trace.nodes), network_cfg)


@pytest.fixture
def sample_gaussian():
    return gaussian_points
