"""Exact Euclidean k-nearest-neighbor queries.

Distances are computed brute force against every reference point, which is
O(M2 * d) per query. Neighbor ranks are stable in reference order, so equal
distances resolve to the lower reference index and duplicated references
count as distinct neighbors.
"""

from __future__ import annotations
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.utils.errors import DataValidationError, DimensionMismatchError, InsufficientDataError

# Memory budget for the (block, M2, d) temporary of batched queries.
BLOCK_BYTES = 32 * 1024 * 1024


@dataclass(frozen=True)
class Neighbor:
    distance: float
    index: int


def _as_refs(refs: ArrayLike) -> NDArray[np.float64]:
    refs = np.asarray(refs, dtype=np.float64)
    if refs.ndim != 2:
        raise DataValidationError("Reference set must be a 2-D (point x dimension) matrix")
    return refs


def _check_k(refs: NDArray[np.float64], k: int) -> None:
    if k < 1:
        raise DataValidationError(f"k must be positive, got {k}")
    if refs.shape[0] < k:
        raise InsufficientDataError(
            f"Need at least k={k} reference points",
            required=k,
            available=int(refs.shape[0]),
        )


def pairwise_distances(points: NDArray[np.float64], refs: NDArray[np.float64]) -> NDArray[np.float64]:
    diff = points[:, None, :] - refs[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def kth_neighbors(
    points: ArrayLike, refs: ArrayLike, k: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """k-th neighbor distance and reference index for every row of ``points``."""
    refs = _as_refs(refs)
    _check_k(refs, k)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[1] != refs.shape[1]:
        raise DimensionMismatchError(
            "Query dimension does not match the reference set",
            expected=int(refs.shape[1]),
            actual=int(points.shape[1]),
        )

    n = points.shape[0]
    distances = np.empty(n, dtype=np.float64)
    indices = np.empty(n, dtype=np.int64)
    per_query = max(1, refs.shape[0] * refs.shape[1] * 8)
    block = max(1, BLOCK_BYTES // per_query)
    for start in range(0, n, block):
        stop = min(n, start + block)
        dist = pairwise_distances(points[start:stop], refs)
        order = np.argsort(dist, axis=1, kind="stable")[:, k - 1]
        indices[start:stop] = order
        distances[start:stop] = dist[np.arange(stop - start), order]

    return distances, indices


def knn_distance(point: ArrayLike, refs: ArrayLike, k: int) -> Neighbor:
    distances, indices = kth_neighbors(np.asarray(point, dtype=np.float64)[None, :], refs, k)
    return Neighbor(distance=float(distances[0]), index=int(indices[0]))


def neighbor_distances(points: ArrayLike, refs: ArrayLike, k: int) -> NDArray[np.float64]:
    """Sorted distances to the 1st..k-th neighbors, shape (points, k)."""
    refs = _as_refs(refs)
    _check_k(refs, k)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dist = pairwise_distances(points, refs)
    return np.sort(dist, axis=1, kind="stable")[:, :k]
