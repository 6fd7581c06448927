"""Parametric CUSUM over per-device Gaussian mixtures.

Every device carries a pre-change density f0, a two-component Gaussian
mixture with a shared sigma, and a post-change density f1 with both means
scaled by the attack factor. Each device runs its own CUSUM on
log f1(x) / f0(x), and the network statistic is the sum over all devices.
"""

from __future__ import annotations
from dataclasses import dataclass
import logging
import math
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp
from scipy.stats import norm

from oditids.config.config import DeviceProfile
from oditids.detection.detector import accumulate
from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)

LOG_DENSITY_FLOOR = math.log(1e-300)


@dataclass(frozen=True)
class MixtureParams:
    active_prob: float
    active_mean: float
    idle_mean: float
    sigma: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.active_prob <= 1.0:
            raise DataValidationError(f"active_prob must lie in [0, 1], got {self.active_prob}")
        if not self.sigma > 0:
            raise DataValidationError(f"sigma must be positive, got {self.sigma}")
        if self.scale < 0:
            raise DataValidationError(f"Attack scale must be nonnegative, got {self.scale}")

    @classmethod
    def from_profile(cls, profile: DeviceProfile, rate_increase: float = 0.0) -> MixtureParams:
        return cls(
            active_prob=profile.active_prob,
            active_mean=profile.active_mean,
            idle_mean=profile.idle_mean,
            sigma=profile.sigma,
            scale=1.0 + rate_increase,
        )

    def log_density(self, x: NDArray[np.float64], scale: float = 1.0) -> NDArray[np.float64]:
        components = np.stack(
            [
                norm.logpdf(x, loc=self.active_mean * scale, scale=self.sigma),
                norm.logpdf(x, loc=self.idle_mean * scale, scale=self.sigma),
            ]
        )
        weights = np.array([self.active_prob, 1.0 - self.active_prob])[:, None]
        log_f = logsumexp(components, axis=0, b=np.broadcast_to(weights, components.shape))
        return np.maximum(log_f, LOG_DENSITY_FLOOR)


def mixture_llr(count: ArrayLike, params: MixtureParams) -> NDArray[np.float64] | float:
    x = np.asarray(count, dtype=np.float64)
    llr = params.log_density(x.reshape(-1), params.scale) - params.log_density(x.reshape(-1))
    if x.ndim == 0:
        return float(llr[0])
    return llr.reshape(x.shape)


def cusum_step(s: float, llr: float) -> float:
    return accumulate(s, llr)


def cooperative_cusum(states: ArrayLike) -> float:
    states = np.asarray(states, dtype=np.float64)
    if states.size == 0:
        raise DataValidationError("Cooperative CUSUM needs at least one device")
    return math.fsum(states.ravel().tolist())


def cusum_paths(increments: ArrayLike) -> NDArray[np.float64]:
    """Column-wise CUSUM recursion over a (time, stream) increment matrix."""
    increments = np.asarray(increments, dtype=np.float64)
    out = np.empty_like(increments)
    s = np.zeros(increments.shape[1:], dtype=np.float64)
    for t in range(increments.shape[0]):
        s = np.maximum(s + increments[t], 0.0)
        out[t] = s
    return out


class CooperativeCusum:
    """Per-device CUSUMs with known (or estimated) mixtures, summed over the network."""

    def __init__(self, params: Sequence[Sequence[MixtureParams]]) -> None:
        if not params or any(len(node) == 0 for node in params):
            raise DataValidationError("Every node needs at least one device model")
        self.params = [list(node) for node in params]
        self.states = [np.zeros(len(node)) for node in self.params]
        self.t = 0

    @property
    def n(self) -> int:
        return len(self.params)

    def reset(self) -> None:
        self.t = 0
        self.states = [np.zeros(len(node)) for node in self.params]

    def _llr(self, counts: NDArray[np.float64], node: int) -> NDArray[np.float64]:
        params = self.params[node]
        if counts.shape[-1] != len(params):
            raise DimensionMismatchError(
                "Count width does not match the device models", expected=len(params), actual=counts.shape[-1]
            )
        counts = np.atleast_2d(counts)
        return np.column_stack([mixture_llr(counts[:, j], p) for j, p in enumerate(params)])

    def step(self, counts: Sequence[ArrayLike]) -> float:
        if len(counts) != self.n:
            raise DimensionMismatchError("Count node count does not match", expected=self.n, actual=len(counts))
        self.t += 1
        for n, x in enumerate(counts):
            llr = self._llr(np.asarray(x, dtype=np.float64), n)[0]
            self.states[n] = np.maximum(self.states[n] + llr, 0.0)
        return cooperative_cusum(np.concatenate(self.states))

    def run_counts(self, counts: Sequence[NDArray[np.int64]]) -> NDArray[np.float64]:
        if len(counts) != self.n:
            raise DimensionMismatchError("Count node count does not match", expected=self.n, actual=len(counts))
        paths = [cusum_paths(self._llr(np.asarray(c, dtype=np.float64), n)) for n, c in enumerate(counts)]
        return np.hstack(paths).sum(axis=1)


def clairvoyant_params(
    nodes: Sequence[Sequence[DeviceProfile]], rate_increase: float
) -> list[list[MixtureParams]]:
    return [[MixtureParams.from_profile(p, rate_increase) for p in node] for node in nodes]
