from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from oditids.detection.knn import Neighbor, kth_neighbors
from oditids.utils.errors import DataValidationError


@dataclass(frozen=True)
class ApplicationProfile:
    """Maps every dimension of the maximal training set to the application it runs."""

    applications: tuple[str, ...]
    max_devices: tuple[int, ...]
    dim_to_app: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.applications) != len(self.max_devices):
            raise DataValidationError("Every application needs a device maximum")
        if any(m < 1 for m in self.max_devices):
            raise DataValidationError("Application maxima must be at least 1")
        if any(a < 0 or a >= len(self.applications) for a in self.dim_to_app):
            raise DataValidationError("Dimension mapped to an unknown application")
        per_app = np.bincount(np.asarray(self.dim_to_app, dtype=np.int64), minlength=self.p)
        if tuple(int(c) for c in per_app) != tuple(self.max_devices):
            raise DataValidationError(
                "Dimension mapping does not match the application maxima",
                details={"mapped": per_app.tolist(), "maxima": list(self.max_devices)},
            )

    @classmethod
    def contiguous(cls, applications: Sequence[str], max_devices: Sequence[int]) -> ApplicationProfile:
        """Dimensions grouped by application in the given order."""
        dims = [a for a, m in enumerate(max_devices) for _ in range(m)]
        return cls(tuple(applications), tuple(int(m) for m in max_devices), tuple(dims))

    @property
    def p(self) -> int:
        return len(self.applications)

    @property
    def d(self) -> int:
        return len(self.dim_to_app)

    def to_dict(self) -> dict[str, Any]:
        return {
            "applications": list(self.applications),
            "max_devices": list(self.max_devices),
            "dim_to_app": list(self.dim_to_app),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ApplicationProfile:
        return cls(
            tuple(data["applications"]),
            tuple(int(m) for m in data["max_devices"]),
            tuple(int(a) for a in data["dim_to_app"]),
        )


@dataclass(frozen=True)
class ActiveMask:
    active: NDArray[np.bool_]
    counts: NDArray[np.int64]

    @classmethod
    def build(cls, active: ArrayLike, profile: ApplicationProfile) -> ActiveMask:
        active = np.asarray(active, dtype=bool)
        if active.shape != (profile.d,):
            raise DataValidationError(
                "Mask length does not match the profile", details={"expected": profile.d, "actual": active.size}
            )
        if not active.any():
            raise DataValidationError("At least one dimension must be active")
        dims = np.asarray(profile.dim_to_app, dtype=np.int64)
        counts = np.bincount(dims[active], minlength=profile.p).astype(np.int64)
        return cls(active=active, counts=counts)

    @classmethod
    def for_counts(cls, profile: ApplicationProfile, counts: Sequence[int]) -> ActiveMask:
        """First ``counts[a]`` dimensions of every application active."""
        if len(counts) != profile.p:
            raise DataValidationError("One count per application is required")
        active = np.zeros(profile.d, dtype=bool)
        seen = [0] * profile.p
        for j, a in enumerate(profile.dim_to_app):
            if seen[a] < counts[a]:
                active[j] = True
                seen[a] += 1
        if seen != [int(c) for c in counts]:
            raise DataValidationError(
                "Requested counts exceed the application maxima",
                details={"counts": list(counts), "maxima": list(profile.max_devices)},
            )
        return cls.build(active, profile)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def full(self) -> bool:
        return bool(self.active.all())


def masked_knn_distance(point: ArrayLike, refs: ArrayLike, mask: ArrayLike, k: int) -> Neighbor:
    """k-th neighbor over the active dimensions only; neighbor selection uses the same metric."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataValidationError("At least one dimension must be active")
    point = np.asarray(point, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    distances, indices = kth_neighbors(point[mask][None, :], refs[:, mask], k)
    return Neighbor(distance=float(distances[0]), index=int(indices[0]))
