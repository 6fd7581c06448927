from __future__ import annotations
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from sklearn.metrics import auc, roc_curve

from oditids.mitigation.localizer import MitigationReport
from oditids.utils.errors import DataValidationError, DimensionMismatchError
from oditids.utils.paths import ensure_parent_directory

logger = logging.getLogger(__name__)


@dataclass
class RocResult:
    fpr: list[float]
    tpr: list[float]
    auc: float
    thresholds: list[float] = field(default_factory=list)
    devices: int = 0
    positives: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "auc": self.auc,
            "devices": self.devices,
            "positives": self.positives,
            "fpr": self.fpr,
            "tpr": self.tpr,
            "thresholds": self.thresholds,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RocResult:
        return cls(
            fpr=[float(v) for v in data["fpr"]],
            tpr=[float(v) for v in data["tpr"]],
            auc=float(data["auc"]),
            thresholds=[float(v) for v in data.get("thresholds", [])],
            devices=int(data.get("devices", 0)),
            positives=int(data.get("positives", 0)),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"fpr": self.fpr, "tpr": self.tpr})


def roc_from_scores(scores: ArrayLike, labels: ArrayLike) -> RocResult:
    """ROC of the rule ``score >= theta`` as theta sweeps down from +inf."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise DimensionMismatchError("One label per score is required", expected=scores.size, actual=labels.size)
    if labels.all() or not labels.any():
        raise DataValidationError("ROC needs both attacked and clean devices")
    if not np.all(np.isfinite(scores)):
        raise DataValidationError("Device scores must be finite")

    fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
    # sklearn marks the initial nothing-flagged point with +inf
    thresholds = np.where(np.isfinite(thresholds), thresholds, np.finfo(np.float64).max)
    return RocResult(
        fpr=fpr.tolist(),
        tpr=tpr.tolist(),
        auc=float(auc(fpr, tpr)),
        thresholds=thresholds.tolist(),
        devices=int(labels.size),
        positives=int(labels.sum()),
    )


def report_scores(
    report: MitigationReport, labels: Sequence[ArrayLike], gate_nodes: bool = False
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Flattened device scores of one report with their ground-truth labels.

    With ``gate_nodes`` devices of unflagged nodes score below every other
    device, so they are only flagged at the very end of the sweep.
    """
    if len(labels) != len(report.device_scores):
        raise DimensionMismatchError(
            "Ground truth does not cover every node", expected=len(report.device_scores), actual=len(labels)
        )
    scores = [np.asarray(s, dtype=np.float64) for s in report.device_scores]
    flat_labels = []
    for n, (s, lab) in enumerate(zip(scores, labels)):
        lab = np.asarray(lab, dtype=bool)
        if lab.shape != s.shape:
            raise DimensionMismatchError(
                "Ground truth does not cover every device", expected=s.size, actual=lab.size, details={"node": n}
            )
        flat_labels.append(lab)

    flat = np.concatenate(scores)
    if gate_nodes:
        floor = flat.min() - 1.0
        flagged = set(report.flagged_nodes)
        flat = np.concatenate([s if n in flagged else np.full_like(s, floor) for n, s in enumerate(scores)])
    return flat, np.concatenate(flat_labels)


def mitigation_roc(
    reports: Sequence[MitigationReport],
    labels: Sequence[Sequence[ArrayLike]],
    gate_nodes: bool = False,
) -> RocResult:
    """Pooled device-identification ROC over the theta2 sweep of several reports."""
    if not reports:
        raise DataValidationError("Mitigation ROC needs at least one report")
    if len(labels) != len(reports):
        raise DimensionMismatchError("One ground truth per report is required", expected=len(reports), actual=len(labels))
    pairs = [report_scores(r, lab, gate_nodes) for r, lab in zip(reports, labels)]
    result = roc_from_scores(np.concatenate([p[0] for p in pairs]), np.concatenate([p[1] for p in pairs]))
    logger.info(f"Mitigation AUC {result.auc:.4f} over {result.devices} device verdicts")
    return result


def write_roc_csv(path: str | Path, roc: RocResult) -> Path:
    path = ensure_parent_directory(path)
    roc.to_frame().to_csv(path, index=False)
    return path
