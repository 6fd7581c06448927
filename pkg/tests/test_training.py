import math

import numpy as np
import pytest

from oditids.config.config import DetectorConfig, EvidenceMode, LegacyGemConfig
from oditids.detection.model import (
    OditModel,
    percentile_rank,
    split_training,
    total_edge_length,
    train,
    train_legacy,
)
from oditids.utils.errors import InsufficientDataError, SchemaVersionError, TrainingError
from oditids.utils.seeding import STREAM_SPLIT, rng_for


def test_split_sizes(sample_gaussian):
    part1, part2 = split_training(sample_gaussian(0, 15), m1=5, m2=10, seed=1)
    assert part1.shape == (5, 2)
    assert part2.shape == (10, 2)


def test_split_is_deterministic_and_disjoint(sample_gaussian):
    data = sample_gaussian(0, 15)
    a1, a2 = split_training(data, 5, 10, seed=7)
    b1, b2 = split_training(data, 5, 10, seed=7)
    np.testing.assert_array_equal(a1, b1)
    np.testing.assert_array_equal(a2, b2)
    rows = {tuple(r) for r in np.vstack([a1, a2])}
    assert len(rows) == 15


def test_split_needs_enough_points(sample_gaussian):
    with pytest.raises(InsufficientDataError):
        split_training(sample_gaussian(0, 10), 5, 10, seed=0)


@pytest.mark.parametrize(
    ("m1", "alpha", "rank"),
    [(5, 0.2, 5), (100, 0.05, 96), (1, 0.5, 1), (10, 0.3, 8), (1000, 0.1, 901), (20, 0.05, 20), (7, 0.05, 7)],
)
def test_percentile_rank(m1, alpha, rank):
    assert percentile_rank(m1, alpha) == rank


def test_percentile_rank_accepts_numpy_alpha():
    assert percentile_rank(100, np.float64(0.05)) == 96


def test_baseline_matches_brute_force_recomputation(sample_gaussian):
    data = sample_gaussian(4, 150)
    cfg = DetectorConfig(k=2, alpha=0.05, m1=50, m2=100, seed=9)
    model = train(data, cfg)

    perm = rng_for(9, STREAM_SPLIT).permutation(150)
    part1, part2 = data[perm[:50]], data[perm[50:150]]
    kth = []
    for point in part1:
        dists = sorted(math.dist(point, ref) for ref in part2)
        kth.append(dists[1])
    expected = sorted(kth)[percentile_rank(50, 0.05) - 1]

    assert model.baseline_stat == pytest.approx(expected, abs=1e-12)
    np.testing.assert_array_equal(model.reference_set, part2)
    assert model.mode is EvidenceMode.LOG_RATIO


def test_baseline_point_sits_at_the_baseline_distance(sample_gaussian, gaussian_model):
    refs = gaussian_model.reference_set
    dists = np.sort(np.linalg.norm(refs - gaussian_model.baseline_point, axis=1))
    assert dists[gaussian_model.k - 1] == pytest.approx(gaussian_model.baseline_stat, abs=1e-12)


def test_duplicated_training_data_is_rejected():
    data = np.ones((30, 2))
    with pytest.raises(TrainingError, match="jitter"):
        train(data, DetectorConfig(k=2, m1=10, m2=20))


def test_reference_set_is_read_only(gaussian_model):
    with pytest.raises(ValueError):
        gaussian_model.reference_set[0, 0] = 1.0


def test_legacy_single_term_reduces_to_kth_distance(sample_gaussian):
    refs = sample_gaussian(1, 30)
    points = sample_gaussian(2, 10)
    cfg = LegacyGemConfig(n1=10, n2=30, m_graph=5, k=3, s=1, gamma=1.0)
    lengths = total_edge_length(points, refs, cfg)
    for point, length in zip(points, lengths):
        kth = sorted(math.dist(point, r) for r in refs)[2]
        assert length == pytest.approx(kth, abs=1e-12)


def test_legacy_squared_two_term_sum():
    refs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    cfg = LegacyGemConfig(n1=1, n2=3, m_graph=1, k=2, s=2, gamma=2.0)
    # distances 0.5, sqrt(1.25), 1.5 -> 0.25 + 1.25
    assert total_edge_length([[0.0, 0.5]], refs, cfg)[0] == pytest.approx(1.5)


def test_legacy_graph_keeps_the_mth_smallest_length(sample_gaussian):
    data = sample_gaussian(5, 15)
    cfg = LegacyGemConfig(n1=5, n2=10, m_graph=4, k=2, s=1, gamma=1.0)
    model = train_legacy(data, cfg, seed=2)

    part1, part2 = split_training(data, 5, 10, seed=2)
    lengths = np.sort(total_edge_length(part1, part2, cfg))
    assert model.baseline_stat == lengths[3]
    assert model.mode is EvidenceMode.LEGACY_GEM
    assert model.k == 2


def test_model_serialization_keeps_every_field(gaussian_model):
    restored = OditModel.from_dict(gaussian_model.to_dict())
    np.testing.assert_array_equal(restored.reference_set, gaussian_model.reference_set)
    np.testing.assert_array_equal(restored.baseline_point, gaussian_model.baseline_point)
    assert restored.baseline_stat == gaussian_model.baseline_stat
    assert restored.config == gaussian_model.config


def test_unknown_model_version_is_rejected(gaussian_model):
    data = gaussian_model.to_dict()
    data["version"] = 99
    with pytest.raises(SchemaVersionError):
        OditModel.from_dict(data)
