import math

from hypothesis import given
from hypothesis import strategies as st
import numpy as np
import pytest

from oditids.config.config import DetectorConfig, EvidenceMode, LegacyGemConfig
from oditids.detection.detector import (
    DetectorState,
    EvidenceResult,
    OditDetector,
    check_alarm,
    cusum_path,
    evidence,
    evidence_batch,
    first_alarm,
    log_ratio_evidence,
    neg_cap,
    update,
)
from oditids.detection.model import OditModel
from oditids.detection.trace import NormalizationMap, ObservationVector
from oditids.utils.errors import DataValidationError, DimensionMismatchError

increments = st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=60)


def _evidence(d_t: float) -> EvidenceResult:
    return EvidenceResult(d_t=d_t, l_t=1.0, y_t=np.zeros(2))


def test_evidence_is_zero_at_the_baseline():
    assert log_ratio_evidence(np.array([0.3]), 0.3, d=2)[0] == 0.0


def test_evidence_scales_with_dimension():
    assert log_ratio_evidence(np.array([math.e * 0.3]), 0.3, d=2)[0] == pytest.approx(2.0)


def test_zero_distance_uses_the_negative_cap():
    assert log_ratio_evidence(np.array([0.0]), 0.3, d=2)[0] == neg_cap(2, 0.3)
    assert neg_cap(2, 0.3) < 0


def test_legacy_evidence_subtracts_the_graph_boundary():
    model = OditModel(
        reference_set=np.array([[0.7, 0.0]]),
        baseline_stat=0.3,
        normalization=NormalizationMap(np.ones(2)),
        config=DetectorConfig(k=1, m1=1, m2=1, evidence_mode=EvidenceMode.LEGACY_GEM),
        legacy=LegacyGemConfig(n1=1, n2=1, m_graph=1, k=1, s=1, gamma=1.0),
    )
    assert evidence(model, [0.0, 0.0]).d_t == pytest.approx(0.4)


def test_evidence_accepts_observation_vectors(gaussian_model):
    x = np.array([0.5, 0.5])
    assert evidence(gaussian_model, ObservationVector(x)).d_t == evidence(gaussian_model, x).d_t


def test_distance_vector_points_away_from_the_neighbor(gaussian_model):
    x = np.array([0.9, 0.1])
    result = evidence(gaussian_model, x)
    np.testing.assert_array_equal(result.y_t, x - gaussian_model.reference_set[result.neighbor])
    assert np.linalg.norm(result.y_t) == pytest.approx(result.l_t)


def test_batch_matches_single_evidence(gaussian_model, sample_gaussian):
    points = sample_gaussian(8, 40)
    batch = evidence_batch(gaussian_model, points)
    for i, point in enumerate(points):
        single = evidence(gaussian_model, point)
        assert batch[i].d_t == single.d_t
        np.testing.assert_array_equal(batch[i].y_t, single.y_t)


def test_dimension_mismatch(gaussian_model):
    with pytest.raises(DimensionMismatchError):
        evidence(gaussian_model, [0.1, 0.2, 0.3])


@pytest.mark.parametrize(
    ("s", "d_t", "expected", "touches_zero"),
    [(0.0, -1.0, 0.0, True), (2.0, 3.0, 5.0, False), (0.5, -0.5, 0.0, True)],
)
def test_update(s, d_t, expected, touches_zero):
    state = DetectorState(s=s, t=4, last_zero=1)
    update(state, _evidence(d_t))
    assert state.s == expected
    assert state.t == 5
    assert (state.last_zero == 5) is touches_zero


def test_alarm_is_inclusive():
    assert not check_alarm(DetectorState(s=9.99), 10.0)
    assert check_alarm(DetectorState(s=10.0), 10.0)


def test_nonpositive_threshold_is_rejected():
    with pytest.raises(DataValidationError):
        check_alarm(DetectorState(s=1.0), 0.0)


def test_history_is_bounded():
    state = DetectorState(history_cap=3)
    for d_t in [1.0, 2.0, -10.0, 4.0, 5.0]:
        update(state, _evidence(d_t))
    times, stats = state.statistics()
    assert times.tolist() == [3, 4, 5]
    assert stats.tolist() == [0.0, 4.0, 9.0]
    assert state.distances().shape == (3, 2)


@given(increments)
def test_cusum_path_is_nonnegative_and_matches_the_recursion(values):
    path = cusum_path(values)
    s = 0.0
    for value, got in zip(values, path):
        s = max(s + value, 0.0)
        assert got == s
    assert np.all(path >= 0)


@given(increments, st.floats(min_value=0.01, max_value=100), st.floats(min_value=0.01, max_value=100))
def test_alarm_time_is_nondecreasing_in_threshold(values, h1, h2):
    low, high = sorted((h1, h2))
    path = cusum_path(values)
    t_low = first_alarm(path, low)
    t_high = first_alarm(path, high)
    if t_high is not None:
        assert t_low is not None and t_low <= t_high


def test_online_steps_match_the_replayed_trajectory(gaussian_model, sample_gaussian):
    data = np.vstack([sample_gaussian(3, 20), np.random.default_rng(4).random((10, 2))])
    detector = OditDetector(gaussian_model)
    online = []
    for x in data:
        detector.step(x)
        online.append(detector.state.s)
    replay = OditDetector(gaussian_model).run(data)
    np.testing.assert_array_equal(np.array(online), replay.stats)


def test_anomalies_drive_the_statistic_up(gaussian_model):
    far = np.tile([0.05, 0.95], (5, 1))
    stats = OditDetector(gaussian_model).run(far).stats
    assert np.all(np.diff(stats) > 0)
    assert first_alarm(stats, gaussian_model.config.h) is not None
