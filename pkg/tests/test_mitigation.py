import json

from hypothesis import given
from hypothesis import strategies as st
import numpy as np
import pytest

from oditids.config.config import AttackConfig, FusionMode, MitigationConfig
from oditids.cooperative.aggregator import NetworkOdit, NetworkTrajectory
from oditids.detection.detector import first_alarm
from oditids.mitigation.localizer import (
    MitigationInputs,
    MitigationReport,
    device_score,
    estimate_onset,
    identify,
    node_score,
)
from oditids.simulation.generator import generate_network, inject_attack
from oditids.utils.errors import DataValidationError


def _inputs(node_stats: np.ndarray, distances: list[np.ndarray]) -> MitigationInputs:
    steps = node_stats.shape[0]
    trajectory = NetworkTrajectory(
        stats=node_stats.sum(axis=1), node_stats=node_stats, distances=tuple(distances)
    )
    return MitigationInputs.from_trajectory(trajectory, alarm_time=steps)


def _recorded() -> MitigationInputs:
    rng = np.random.default_rng(0)
    node_stats = np.array([[0, 0], [0, 0], [1, 0], [2, 0], [4, 0.5], [7, 0.2]], dtype=float)
    distances = [rng.normal(0, 0.01, (6, 3)) + [0.3, 0, 0], rng.normal(0, 0.01, (6, 2))]
    return _inputs(node_stats, distances)


@pytest.fixture
def recorded() -> MitigationInputs:
    return _recorded()


def test_onset_follows_the_last_zero():
    assert estimate_onset([0, 0, 0, 0, 0, 1, 2, 3, 5]) == 6


def test_onset_falls_back_to_the_window_start():
    assert estimate_onset([1.0, 2.0, 3.0], times=[10, 11, 12]) == 10


def test_onset_at_the_alarm_when_zero_just_before():
    assert estimate_onset([1.0, 0.0, 2.0]) == 3


def test_onset_ignores_history_after_the_alarm():
    assert estimate_onset([0.0, 1.0, 2.0, 0.0, 1.0], alarm_time=3) == 2


def test_node_score_examples():
    assert node_score([4.0, 4.0, 4.0], 1, 3) == 4.0
    assert node_score([1.0, 2.0, 3.0], 1, 3) == 2.0
    assert node_score(np.zeros(5), 2, 5) == 0.0


def test_device_score_examples():
    assert device_score(np.array([[0.2], [0.4]]), 1, 2)[0] == pytest.approx(0.3)
    eps = 1e-3
    oscillating = np.array([[eps], [-eps]] * 10)
    assert device_score(oscillating, 1, 20)[0] == pytest.approx(0.0, abs=1e-15)
    assert device_score(oscillating, 1, 20, magnitude=True)[0] == pytest.approx(eps)


def test_window_must_be_covered():
    with pytest.raises(DataValidationError):
        node_score([1.0, 2.0], 1, 3, times=[2, 3])
    with pytest.raises(DataValidationError):
        node_score([1.0, 2.0], 3, 2)


def test_identify_localizes_the_shifted_devices(recorded):
    report = identify(recorded, MitigationConfig(theta1=1.0, theta2=0.1))
    assert report.onset == 3
    assert report.alarm == 6
    assert report.flagged_nodes == [0]
    assert report.flagged_devices == [(0, 0)]


def test_zero_node_threshold_flags_every_node(recorded):
    report = identify(recorded, MitigationConfig(theta1=0.0, theta2=0.1))
    assert report.flagged_nodes == [0, 1]


def test_huge_device_threshold_flags_nothing(recorded):
    report = identify(recorded, MitigationConfig(theta1=0.0, theta2=1e300))
    assert report.flagged_devices == []


@given(
    st.floats(min_value=0, max_value=10),
    st.floats(min_value=0, max_value=10),
    st.floats(min_value=-0.1, max_value=0.5),
    st.floats(min_value=-0.1, max_value=0.5),
)
def test_flags_shrink_as_thresholds_grow(t1a, t1b, t2a, t2b):
    recorded = _recorded()
    theta1_lo, theta1_hi = sorted((t1a, t1b))
    theta2_lo, theta2_hi = sorted((max(t2a, 0.0), max(t2b, 0.0)))
    loose = identify(recorded, MitigationConfig(theta1=theta1_lo, theta2=theta2_lo))
    strict = identify(recorded, MitigationConfig(theta1=theta1_hi, theta2=theta2_hi))
    assert set(strict.flagged_nodes) <= set(loose.flagged_nodes)
    assert set(strict.flagged_devices) <= set(loose.flagged_devices)


def test_report_names_blocked_devices(recorded):
    named = MitigationInputs(
        times=recorded.times,
        node_stats=recorded.node_stats,
        distances=recorded.distances,
        alarm_time=recorded.alarm_time,
        device_ids=(("cam", "tv", "light"), ("a", "b")),
    )
    report = identify(named, MitigationConfig(theta1=1.0, theta2=0.1))
    assert report.to_dict()["blocked"] == ["cam"]
    restored = MitigationReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert restored.flagged_devices == report.flagged_devices
    assert restored.device_ids == [["cam", "tv", "light"], ["a", "b"]]
    assert restored.to_dict()["blocked"] == ["cam"]


def test_online_onset_uses_the_network_fusion(network_models, training_trace):
    network = NetworkOdit(network_models, h=1e12, fusion=FusionMode.MAX)
    observations = [obs[:120] for obs in network.normalize(list(training_trace.nodes))]
    for _ in network.stream(observations):
        pass

    inputs = MitigationInputs.from_network(network)
    replayed = NetworkOdit(network_models, h=1e12, fusion=FusionMode.MAX).run(observations)
    np.testing.assert_allclose(inputs.global_path(), inputs.node_stats.max(axis=1))
    np.testing.assert_allclose(inputs.global_path(), replayed.stats, atol=1e-9)


def test_online_history_matches_the_replay(network_models, topology):
    attack = AttackConfig(onset=40, devices=[(0, 1), (0, 3)], rate_increase=0.5)
    trace = inject_attack(generate_network(topology, 200, seed=3), attack)

    network = NetworkOdit(network_models, h=1e12)
    observations = network.normalize(list(trace.nodes))
    trajectory = NetworkOdit(network_models, h=1e12).run(observations)
    alarm = first_alarm(trajectory.stats, 5.0) or trajectory.steps
    for _ in network.stream([obs[:alarm] for obs in observations]):
        pass

    cfg = MitigationConfig(theta1=0.5, theta2=0.05)
    online = identify(MitigationInputs.from_network(network), cfg)
    replayed = identify(MitigationInputs.from_trajectory(trajectory, alarm), cfg)
    assert online.onset == replayed.onset
    assert online.flagged_devices == replayed.flagged_devices
    np.testing.assert_allclose(online.node_scores, replayed.node_scores, atol=1e-9)
