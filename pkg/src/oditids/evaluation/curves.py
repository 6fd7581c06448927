"""Average detection delay against false positive rate.

Every detector replays each trial once and records its statistic
trajectory. The alarm time for any threshold is the first crossing of that
trajectory, since stopping at an alarm never changes the statistic before it,
so one recording serves the whole threshold sweep.

FPR is the fraction of attack-free trials of ``horizon`` steps with any
alarm. ADD averages the delays of the attacked trials that detected at or
after the onset; an alarm before the onset is a false alarm and a trial with
no alarm within the post-onset horizon is a miss. The censored ADD counts a
miss as the whole post-onset horizon.
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Any, Callable, Sequence, TypeVar

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from oditids.evaluation.scenarios import Scenario
from oditids.evaluation.trials import PathSource, SingleSource, StreamDetector, first_crossings
from oditids.utils.errors import DataValidationError
from oditids.utils.paths import ensure_parent_directory
from oditids.utils.seeding import STREAM_TRIAL, derive_seed

logger = logging.getLogger(__name__)

MIN_TRIALS = 30
Z_95 = 1.96
NOMINAL_TRIAL = 0
ATTACK_TRIAL = 1

T = TypeVar("T")


def trial_seed(seed: int, kind: int, i: int) -> int:
    return derive_seed(seed, STREAM_TRIAL, kind, i)


def map_ordered(fn: Callable[[int], T], count: int, workers: int = 1) -> list[T]:
    """``[fn(i) for i in range(count)]``, optionally on a thread pool; order is kept."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


@dataclass(frozen=True)
class CurvePoint:
    h: float
    fpr: float
    add: float | None
    ci: float | None
    censored_add: float | None
    miss_rate: float
    detections: int
    false_alarms: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "h": self.h,
            "fpr": self.fpr,
            "add": self.add,
            "ci": self.ci,
            "censored_add": self.censored_add,
            "miss_rate": self.miss_rate,
            "detections": self.detections,
            "false_alarms": self.false_alarms,
        }


@dataclass
class Curve:
    detector: str
    scenario: str
    trials: int
    points: list[CurvePoint] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "detector": self.detector,
            "scenario": self.scenario,
            "trials": self.trials,
            "points": [p.to_dict() for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Curve:
        return cls(
            detector=data["detector"],
            scenario=data["scenario"],
            trials=int(data["trials"]),
            points=[CurvePoint(**p) for p in data["points"]],
        )

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "fpr": p.fpr,
                "add": math.nan if p.add is None else p.add,
                "ci": math.nan if p.ci is None else p.ci,
                "h": p.h,
                "censored_add": math.nan if p.censored_add is None else p.censored_add,
                "miss_rate": p.miss_rate,
            }
            for p in self.points
        ]
        return pd.DataFrame(rows, columns=["fpr", "add", "ci", "h", "censored_add", "miss_rate"])

    def point_at_fpr(self, target: float) -> CurvePoint | None:
        """Point with the smallest threshold whose FPR is at most ``target``."""
        eligible = [p for p in self.points if p.fpr <= target]
        return min(eligible, key=lambda p: p.h) if eligible else None

    def add_at_fpr(self, target: float) -> float | None:
        point = self.point_at_fpr(target)
        return None if point is None else point.add


@dataclass
class RecordedPaths:
    nominal: list[NDArray[np.float64]] = field(default_factory=list)
    attacked: list[NDArray[np.float64]] = field(default_factory=list)
    onsets: list[int] = field(default_factory=list)


def record_paths(
    sources: Sequence[PathSource],
    scenario: Scenario,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict[str, RecordedPaths]:
    """Statistic trajectories of every source on the same seeded trials."""
    names = [name for source in sources for name in source.names]
    if len(set(names)) != len(names):
        raise DataValidationError("Detector names must be unique", details={"names": names})

    def replay(counts: Sequence[NDArray[Any]]) -> dict[str, NDArray[np.float64]]:
        out: dict[str, NDArray[np.float64]] = {}
        for source in sources:
            out.update(source.paths(counts))
        return out

    def nominal(i: int) -> dict[str, NDArray[np.float64]]:
        return replay(scenario.nominal(trial_seed(seed, NOMINAL_TRIAL, i)))

    def attacked(i: int) -> tuple[dict[str, NDArray[np.float64]], int]:
        trial = scenario.attacked(trial_seed(seed, ATTACK_TRIAL, i))
        return replay(trial.counts), trial.onset

    nominal_runs = map_ordered(nominal, trials, workers)
    attack_runs = map_ordered(attacked, trials, workers)

    recorded = {name: RecordedPaths() for name in names}
    for paths in nominal_runs:
        for name, path in paths.items():
            recorded[name].nominal.append(path)
    for paths, onset in attack_runs:
        for name, path in paths.items():
            recorded[name].attacked.append(path)
            recorded[name].onsets.append(onset)
    logger.debug(f"Recorded {trials} attack-free and {trials} attacked trials for {', '.join(names)}")
    return recorded


def auto_grid(recorded: RecordedPaths, points: int) -> NDArray[np.float64]:
    """Geometric thresholds spanning the attack-free trajectory maxima."""
    maxima = np.array([path.max() if path.size else 0.0 for path in recorded.nominal])
    positive = maxima[np.isfinite(maxima) & (maxima > 0)]
    if positive.size == 0:
        return np.geomspace(1e-3, 1.0, points)
    return np.geomspace(0.5 * positive.min(), 1.5 * positive.max(), points)


def sweep(recorded: RecordedPaths, h_grid: ArrayLike, post_onset_horizon: int) -> list[CurvePoint]:
    h_grid = np.asarray(h_grid, dtype=np.float64)
    if h_grid.size == 0:
        raise DataValidationError("Threshold grid must not be empty")
    if not recorded.nominal or not recorded.attacked:
        raise DataValidationError("Sweeps need attack-free and attacked trials")

    nominal = np.vstack([first_crossings(path, h_grid) for path in recorded.nominal])
    attacked = np.vstack([first_crossings(path, h_grid) for path in recorded.attacked])
    onsets = np.asarray(recorded.onsets, dtype=np.int64)[:, None]

    false_alarm = (attacked > 0) & (attacked < onsets)
    detected = attacked >= onsets
    missed = attacked == 0
    delays = attacked - onsets

    points = []
    for i, h in enumerate(h_grid):
        hit = delays[detected[:, i], i].astype(np.float64)
        n = hit.size
        add = float(hit.mean()) if n else None
        ci = float(Z_95 * hit.std(ddof=1) / math.sqrt(n)) if n >= 2 else (0.0 if n else None)
        clean = ~false_alarm[:, i]
        censored = np.where(missed[clean, i], post_onset_horizon, delays[clean, i]).astype(np.float64)
        points.append(
            CurvePoint(
                h=float(h),
                fpr=float(np.mean(nominal[:, i] > 0)),
                add=add,
                ci=ci,
                censored_add=float(censored.mean()) if censored.size else None,
                miss_rate=float(np.mean(missed[:, i])),
                detections=int(n),
                false_alarms=int(false_alarm[:, i].sum()),
            )
        )
    points.sort(key=lambda p: (p.fpr, -p.h))
    return points


def build_curve(
    name: str,
    scenario: Scenario,
    recorded: RecordedPaths,
    h_grid: ArrayLike | None = None,
    points: int = 40,
) -> Curve:
    grid = auto_grid(recorded, points) if h_grid is None else h_grid
    return Curve(
        detector=name,
        scenario=scenario.name,
        trials=len(recorded.nominal),
        points=sweep(recorded, grid, scenario.post_onset_horizon),
    )


def add_vs_fpr(
    detector: StreamDetector | PathSource,
    scenario: Scenario,
    h_grid: ArrayLike | None,
    trials: int,
    seed: int,
    name: str = "detector",
    workers: int = 1,
    points: int = 40,
) -> Curve:
    if trials < MIN_TRIALS:
        raise DataValidationError(f"ADD-vs-FPR curves need at least {MIN_TRIALS} trials, got {trials}")
    if h_grid is not None and len(np.atleast_1d(h_grid)) == 0:
        raise DataValidationError("Threshold grid must not be empty")
    source = detector if hasattr(detector, "paths") else SingleSource(name, detector)  # type: ignore[arg-type]
    recorded = record_paths([source], scenario, trials, seed, workers)
    label = source.names[0]
    return build_curve(label, scenario, recorded[label], h_grid, points)


def write_curve_csv(path: str | Path, curve: Curve) -> Path:
    path = ensure_parent_directory(path)
    curve.to_frame().to_csv(path, index=False)
    return path
