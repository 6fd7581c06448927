import numpy as np
import pytest

from oditids.detection.knn import kth_neighbors, knn_distance, neighbor_distances
from oditids.utils.errors import DimensionMismatchError, InsufficientDataError


def test_point_on_a_reference_has_zero_distance():
    result = knn_distance([0.0, 0.0], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], k=1)
    assert result.distance == 0.0
    assert result.index == 0


def test_ties_resolve_in_reference_order():
    result = knn_distance([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0], [3.0, 0.0]], k=2)
    assert result.distance == 1.0
    assert result.index == 1


def test_duplicated_references_count_as_distinct_neighbors():
    result = knn_distance([0.0], [[1.0], [1.0], [5.0]], k=2)
    assert result.distance == 1.0


def test_matches_exhaustive_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(3, 30))
        k = int(rng.integers(1, m + 1))
        refs = rng.random((m, d))
        point = rng.random(d)

        oracle = sorted(float(np.sqrt(np.sum((point - r) ** 2))) for r in refs)[k - 1]
        assert knn_distance(point, refs, k).distance == pytest.approx(oracle, abs=1e-12)


def test_batched_queries_match_single_queries():
    rng = np.random.default_rng(1)
    refs = rng.random((40, 3))
    points = rng.random((50, 3))
    distances, indices = kth_neighbors(points, refs, 3)
    for i, point in enumerate(points):
        single = knn_distance(point, refs, 3)
        assert distances[i] == single.distance
        assert indices[i] == single.index


def test_neighbor_distances_are_sorted_prefix():
    rng = np.random.default_rng(2)
    refs = rng.random((20, 2))
    point = rng.random(2)
    nearest = neighbor_distances(point, refs, 4)[0]
    assert np.all(np.diff(nearest) >= 0)
    assert nearest[-1] == pytest.approx(knn_distance(point, refs, 4).distance, abs=1e-15)


def test_dimension_mismatch_is_rejected():
    with pytest.raises(DimensionMismatchError):
        knn_distance([0.0, 0.0, 0.0], [[0.0, 0.0]], k=1)


def test_k_larger_than_reference_set_is_rejected():
    with pytest.raises(InsufficientDataError) as info:
        knn_distance([0.0], [[1.0], [2.0]], k=3)
    assert info.value.required == 3
    assert info.value.available == 2
