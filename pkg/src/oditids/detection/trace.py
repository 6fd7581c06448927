from __future__ import annotations
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.utils.errors import DataValidationError, DimensionMismatchError


@dataclass(frozen=True)
class RawTrace:
    """Packets per time step for the devices behind one node, shape (time, device)."""

    counts: NDArray[np.int64]
    device_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise DataValidationError(
                "Trace counts must be a 2-D (time x device) matrix",
                details={"ndim": counts.ndim},
            )
        if counts.size and not np.issubdtype(counts.dtype, np.integer):
            if not np.all(np.isfinite(counts)) or not np.all(counts == np.round(counts)):
                raise DataValidationError("Trace counts must be integers")
        counts = counts.astype(np.int64, copy=False)
        if counts.size and counts.min() < 0:
            raise DataValidationError(
                "Trace counts must be nonnegative", details={"min": int(counts.min())}
            )
        device_ids = tuple(str(d) for d in self.device_ids)
        if len(device_ids) != counts.shape[1]:
            raise DimensionMismatchError(
                "Number of device ids does not match trace width",
                expected=counts.shape[1],
                actual=len(device_ids),
            )
        if len(set(device_ids)) != len(device_ids):
            raise DataValidationError("Device ids must be unique")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "device_ids", device_ids)

    @classmethod
    def from_counts(cls, counts: ArrayLike, device_ids: Sequence[str] | None = None) -> RawTrace:
        counts = np.asarray(counts)
        if device_ids is None:
            width = counts.shape[1] if counts.ndim == 2 else 0
            device_ids = [f"dev{j}" for j in range(width)]
        return cls(counts=counts, device_ids=tuple(device_ids))

    @property
    def steps(self) -> int:
        return int(self.counts.shape[0])

    @property
    def d(self) -> int:
        return int(self.counts.shape[1])

    def window(self, start: int, stop: int) -> RawTrace:
        return RawTrace(counts=self.counts[start:stop], device_ids=self.device_ids)


@dataclass(frozen=True)
class NormalizationMap:
    maxima: NDArray[np.float64]

    def __post_init__(self) -> None:
        maxima = np.asarray(self.maxima, dtype=np.float64)
        if maxima.ndim != 1 or maxima.size == 0:
            raise DataValidationError("Normalization map must be a nonempty vector")
        if not np.all(np.isfinite(maxima)) or np.any(maxima <= 0):
            raise DataValidationError("Normalization maxima must be positive and finite")
        object.__setattr__(self, "maxima", maxima)

    @property
    def d(self) -> int:
        return int(self.maxima.size)

    def to_list(self) -> list[float]:
        return [float(m) for m in self.maxima]


@dataclass(frozen=True)
class ObservationVector:
    values: NDArray[np.float64]
    time_index: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DataValidationError("Observation must be a vector")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DataValidationError("Observation entries must be finite and nonnegative")
        if self.time_index < 0:
            raise DataValidationError("time_index must be nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return int(self.values.size)


def build_normalization(raw: RawTrace) -> NormalizationMap:
    if raw.steps == 0 or raw.d == 0:
        raise DataValidationError("Cannot build a normalization map from an empty trace")

    maxima = raw.counts.max(axis=0).astype(np.float64)
    # always-idle devices stay representable
    maxima[maxima == 0] = 1.0
    return NormalizationMap(maxima=maxima)


def normalize(raw: RawTrace, norm: NormalizationMap) -> NDArray[np.float64]:
    """Divide every device column by its maximum. Values above 1 are kept."""
    if raw.d != norm.d:
        raise DimensionMismatchError(
            "Trace width does not match the normalization map",
            expected=norm.d,
            actual=raw.d,
        )
    return raw.counts.astype(np.float64) / norm.maxima


def iter_observations(data: NDArray[np.float64], start: int = 1) -> Iterator[ObservationVector]:
    for offset, row in enumerate(data):
        yield ObservationVector(values=row, time_index=start + offset)

