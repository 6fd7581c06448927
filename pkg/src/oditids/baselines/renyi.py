"""Windowed information-metric detector.

Each node aggregates the packet counts of its devices. Over a sliding window
the empirical histogram of that aggregate is compared with the histogram of
attack-free training data by the Renyi divergence of the configured order.
Both histograms use add-one smoothing over shared equal-width bins, with
values beyond the last edge counted in the last bin. The network statistic is
the largest node divergence, and is 0 until the first window is full.
"""

from __future__ import annotations
from dataclasses import dataclass
import logging
import math
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.config.config import RenyiConfig
from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)

SMOOTHING = 1.0


def _distribution(p: ArrayLike) -> NDArray[np.float64]:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or p.sum() <= 0:
        raise DataValidationError("A distribution must be a nonnegative, nonzero vector")
    return p / p.sum()


def renyi_divergence(p: ArrayLike, q: ArrayLike, order: float) -> float:
    if order <= 0 or order == 1.0:
        raise DataValidationError(f"Renyi order must be positive and differ from 1, got {order}")
    p, q = _distribution(p), _distribution(q)
    if p.shape != q.shape:
        raise DimensionMismatchError("Distributions differ in support", expected=q.size, actual=p.size)
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    total = float(np.sum(p[support] ** order * q[support] ** (1.0 - order)))
    return max(math.log(total) / (order - 1.0), 0.0)


def kl_divergence(p: ArrayLike, q: ArrayLike) -> float:
    p, q = _distribution(p), _distribution(q)
    if p.shape != q.shape:
        raise DimensionMismatchError("Distributions differ in support", expected=q.size, actual=p.size)
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def bin_indices(values: ArrayLike, edges: NDArray[np.float64]) -> NDArray[np.int64]:
    bins = edges.size - 1
    idx = np.searchsorted(edges, np.asarray(values, dtype=np.float64), side="right") - 1
    return np.clip(idx, 0, bins - 1)


def smoothed_histogram(values: ArrayLike, edges: NDArray[np.float64]) -> NDArray[np.float64]:
    counts = np.bincount(bin_indices(values, edges), minlength=edges.size - 1).astype(np.float64)
    return _distribution(counts + SMOOTHING)


@dataclass(frozen=True)
class RenyiReference:
    edges: NDArray[np.float64]
    q: NDArray[np.float64]

    @classmethod
    def fit(cls, aggregate: ArrayLike, cfg: RenyiConfig) -> RenyiReference:
        aggregate = np.asarray(aggregate, dtype=np.float64)
        if aggregate.size == 0:
            raise DataValidationError("Reference histogram needs attack-free data")
        upper = max(cfg.range_factor * float(aggregate.max()), 1.0)
        edges = np.linspace(0.0, upper, cfg.bins + 1)
        return cls(edges=edges, q=smoothed_histogram(aggregate, edges))


def renyi_detector(window: ArrayLike, reference: RenyiReference, cfg: RenyiConfig) -> tuple[float, bool]:
    window = np.asarray(window, dtype=np.float64)
    if window.size != cfg.window_len:
        raise DataValidationError(
            "Window is not full", details={"expected": cfg.window_len, "actual": int(window.size)}
        )
    distance = renyi_divergence(smoothed_histogram(window, reference.edges), reference.q, cfg.order)
    return distance, distance >= cfg.threshold


def sliding_divergence(aggregate: ArrayLike, reference: RenyiReference, cfg: RenyiConfig) -> NDArray[np.float64]:
    """Divergence of every full trailing window; 0 before the first one is full."""
    aggregate = np.asarray(aggregate, dtype=np.float64)
    steps, w, bins = aggregate.size, cfg.window_len, reference.q.size
    out = np.zeros(steps, dtype=np.float64)
    if steps < w:
        return out

    one_hot = np.zeros((steps + 1, bins), dtype=np.float64)
    one_hot[np.arange(1, steps + 1), bin_indices(aggregate, reference.edges)] = 1.0
    cumulative = np.cumsum(one_hot, axis=0)
    windows = cumulative[w:] - cumulative[:-w] + SMOOTHING
    p = windows / windows.sum(axis=1, keepdims=True)

    total = np.sum(p**cfg.order * reference.q ** (1.0 - cfg.order), axis=1)
    out[w - 1 :] = np.maximum(np.log(total) / (cfg.order - 1.0), 0.0)
    return out


class RenyiNetworkDetector:
    def __init__(self, references: Sequence[RenyiReference], cfg: RenyiConfig) -> None:
        if not references:
            raise DataValidationError("Renyi detection needs at least one node reference")
        self.references = list(references)
        self.cfg = cfg

    @property
    def n(self) -> int:
        return len(self.references)

    @classmethod
    def fit(cls, nominal: Sequence[ArrayLike], cfg: RenyiConfig) -> RenyiNetworkDetector:
        return cls([RenyiReference.fit(np.asarray(c).sum(axis=1), cfg) for c in nominal], cfg)

    def run_counts(self, counts: Sequence[NDArray[np.int64]]) -> NDArray[np.float64]:
        if len(counts) != self.n:
            raise DimensionMismatchError("Count node count does not match", expected=self.n, actual=len(counts))
        paths = [
            sliding_divergence(np.asarray(c).sum(axis=1), ref, self.cfg) for c, ref in zip(counts, self.references)
        ]
        return np.max(np.column_stack(paths), axis=1)
