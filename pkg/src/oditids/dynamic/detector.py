from __future__ import annotations
import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from oditids.config.config import DimensionMode, EvidenceMode
from oditids.detection.detector import (
    DetectorState,
    EvidenceResult,
    NodeTrajectory,
    cusum_path,
    evidence_from_points,
    update,
)
from oditids.detection.model import OditModel
from oditids.dynamic.masking import ActiveMask, ApplicationProfile
from oditids.dynamic.regression import BaselineApproximator
from oditids.utils.errors import DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)


class DynamicOditDetector:
    """ODIT over a varying set of active devices.

    The model is trained on the maximal device set. At each step the inactive
    dimensions are dropped from both the observation and the reference set,
    and the baseline statistic comes from ``baseline`` as a function of the
    per-application active counts. A full mask uses the model's own baseline.
    """

    def __init__(
        self,
        model: OditModel,
        profile: ApplicationProfile,
        baseline: BaselineApproximator | None = None,
        dimension_mode: DimensionMode = DimensionMode.ACTIVE,
    ) -> None:
        if model.mode is not EvidenceMode.LOG_RATIO:
            raise DataValidationError("Dynamic environments require the log-ratio evidence")
        if profile.d != model.d:
            raise DimensionMismatchError(
                "Application profile does not cover the model dimensions",
                expected=model.d,
                actual=profile.d,
            )
        self.model = model
        self.profile = profile
        self.baseline = baseline if baseline is not None else model.dynamic
        self.dimension_mode = dimension_mode
        self.state = DetectorState(history_cap=model.config.history_cap)

    def reset(self) -> None:
        self.state.reset()

    def baseline_for(self, mask: ActiveMask) -> float:
        if mask.full or self.baseline is None:
            if not mask.full:
                logger.warning("No baseline approximator configured; using the full-set baseline")
            return self.model.baseline_stat
        return self.baseline.predict(mask.counts)

    def _d_eff(self, mask: ActiveMask) -> int:
        return mask.n_active if self.dimension_mode is DimensionMode.ACTIVE else self.model.d

    def evidence(self, x: ArrayLike, mask: ActiveMask) -> EvidenceResult:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.model.d,):
            raise DimensionMismatchError(
                "Observation dimension does not match the model", expected=self.model.d, actual=x.size
            )
        refs = self.model.reference_set[:, mask.active]
        batch = evidence_from_points(
            self.model, x[mask.active][None, :], refs, self.baseline_for(mask), self._d_eff(mask)
        )
        y_t = np.zeros(self.model.d, dtype=np.float64)
        y_t[mask.active] = batch.y_t[0]
        return EvidenceResult(
            d_t=float(batch.d_t[0]), l_t=float(batch.l_t[0]), y_t=y_t, neighbor=int(batch.neighbors[0])
        )

    def step(self, x: ArrayLike, mask: ActiveMask) -> EvidenceResult:
        ev = self.evidence(x, mask)
        update(self.state, ev)
        return ev

    def run(self, data: ArrayLike, masks: Sequence[ActiveMask] | ActiveMask) -> NodeTrajectory:
        data = np.asarray(data, dtype=np.float64)
        if isinstance(masks, ActiveMask):
            masks = [masks] * data.shape[0]
        if len(masks) != data.shape[0]:
            raise DataValidationError("One mask per observation is required")

        results = [self.evidence(x, mask) for x, mask in zip(data, masks)]
        increments = np.array([r.d_t for r in results])
        return NodeTrajectory(
            stats=cusum_path(increments),
            evidence=increments,
            distances=np.vstack([r.y_t for r in results]) if results else np.empty((0, self.model.d)),
        )

