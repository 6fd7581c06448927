from __future__ import annotations
import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import beta

from oditids.config.config import CalibrationConfig, FusionMode
from oditids.cooperative.aggregator import fuse_paths
from oditids.detection.detector import cusum_path, evidence_batch
from oditids.detection.model import OditModel
from oditids.utils.errors import CalibrationError, DataValidationError, InsufficientDataError
from oditids.utils.seeding import STREAM_CALIBRATION, rng_for

logger = logging.getLogger(__name__)


def threshold_grid(cfg: CalibrationConfig) -> NDArray[np.float64]:
    return np.geomspace(cfg.grid_min, cfg.grid_max, cfg.grid_points)


def false_alarm_rate(maxima: ArrayLike, h: float) -> float:
    """Fraction of attack-free runs whose statistic reached h."""
    maxima = np.asarray(maxima, dtype=np.float64)
    return float(np.mean(maxima >= h))


def fpr_upper_bound(alarms: int, trials: int, confidence: float) -> float:
    """One-sided Clopper-Pearson bound on the false alarm rate; the point estimate when confidence is 0."""
    if confidence <= 0.0:
        return alarms / trials
    if alarms >= trials:
        return 1.0
    return float(beta.ppf(confidence, alarms + 1, trials - alarms))


def threshold_for_fpr(
    maxima: ArrayLike, target_fpr: float, grid: ArrayLike, confidence: float = 0.0
) -> float:
    """Smallest grid threshold whose false alarm rate bound is at most the target."""
    if not 0.0 < target_fpr <= 1.0:
        raise DataValidationError(f"target_fpr must lie in (0, 1], got {target_fpr}")
    if not 0.0 <= confidence < 1.0:
        raise DataValidationError(f"confidence must lie in [0, 1), got {confidence}")
    maxima = np.asarray(maxima, dtype=np.float64)
    grid = np.sort(np.asarray(grid, dtype=np.float64))

    best_fpr = 1.0
    for h in grid:
        alarms = int(np.count_nonzero(maxima >= h))
        best_fpr = min(best_fpr, alarms / maxima.size)
        if fpr_upper_bound(alarms, maxima.size, confidence) <= target_fpr:
            return float(h)

    raise CalibrationError(
        f"No threshold in the grid reaches a false alarm rate of {target_fpr}",
        best_fpr=best_fpr,
        details={"grid_max": float(grid[-1]), "confidence": confidence, "trials": int(maxima.size)},
    )


def window_maxima(
    increments: NDArray[np.float64], horizon: int, trials: int, seed: int
) -> NDArray[np.float64]:
    """Maximum statistic over ``trials`` random attack-free windows of ``horizon`` steps."""
    if increments.size < horizon:
        raise InsufficientDataError(
            f"Nominal trace shorter than the calibration horizon {horizon}",
            required=horizon,
            available=int(increments.size),
        )
    rng = rng_for(seed, STREAM_CALIBRATION)
    starts = rng.integers(0, increments.size - horizon + 1, size=trials)
    return np.array([cusum_path(increments[s : s + horizon]).max() for s in starts])


def calibrate_threshold(
    model: OditModel,
    nominal_trace: ArrayLike,
    target_fpr: float,
    horizon: int,
    trials: int,
    seed: int,
    cfg: CalibrationConfig | None = None,
) -> float:
    if trials < 1:
        raise DataValidationError(f"trials must be at least 1, got {trials}")
    cfg = cfg or CalibrationConfig()

    increments = evidence_batch(model, nominal_trace).d_t
    maxima = window_maxima(increments, horizon, trials, seed)
    h = threshold_for_fpr(maxima, target_fpr, threshold_grid(cfg), cfg.confidence)
    logger.info(
        f"Calibrated h={h:.6g} for target FPR {target_fpr} "
        f"(estimated {false_alarm_rate(maxima, h):.4f} over {trials} windows of {horizon} steps)"
    )
    return h


def fused_window_maxima(
    increments: Sequence[NDArray[np.float64]],
    horizon: int,
    trials: int,
    seed: int,
    fusion: FusionMode = FusionMode.SUM,
) -> NDArray[np.float64]:
    """Window maxima of the fused network statistic; all nodes share each window."""
    steps = min(inc.size for inc in increments)
    if steps < horizon:
        raise InsufficientDataError(
            f"Nominal trace shorter than the calibration horizon {horizon}", required=horizon, available=steps
        )
    rng = rng_for(seed, STREAM_CALIBRATION)
    starts = rng.integers(0, steps - horizon + 1, size=trials)
    maxima = []
    for s in starts:
        node_stats = np.column_stack([cusum_path(inc[s : s + horizon]) for inc in increments])
        maxima.append(float(fuse_paths(node_stats, fusion).max()))
    return np.asarray(maxima)


def calibrate_network_threshold(
    models: Sequence[OditModel],
    nominal_counts: Sequence[ArrayLike],
    target_fpr: float,
    fusion: FusionMode = FusionMode.SUM,
    cfg: CalibrationConfig | None = None,
    seed: int = 0,
) -> float:
    """Global threshold of a network of node models at the target false alarm rate."""
    cfg = cfg or CalibrationConfig()
    if len(models) != len(nominal_counts):
        raise DataValidationError("One nominal trace per node model is required")
    increments = [
        evidence_batch(m, np.asarray(c, dtype=np.float64) / m.normalization.maxima).d_t
        for m, c in zip(models, nominal_counts)
    ]
    maxima = fused_window_maxima(increments, cfg.horizon, cfg.trials, seed, fusion)
    h = threshold_for_fpr(maxima, target_fpr, threshold_grid(cfg), cfg.confidence)
    logger.info(f"Calibrated network threshold h={h:.6g} ({fusion.value} fusion, target FPR {target_fpr})")
    return h
