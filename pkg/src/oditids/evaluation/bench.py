"""Per-evidence cost against reference-set size and dimension."""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from pathlib import Path
import time
from typing import Any, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from oditids.config.config import BenchConfig, DetectorConfig
from oditids.detection.detector import evidence_batch
from oditids.detection.model import OditModel
from oditids.detection.trace import NormalizationMap
from oditids.utils.errors import DataValidationError
from oditids.utils.paths import ensure_parent_directory
from oditids.utils.seeding import STREAM_BENCH, rng_for

logger = logging.getLogger(__name__)

BLOCK = 32


@dataclass(frozen=True)
class BenchCell:
    m2: int
    d: int
    seconds: float


@dataclass
class BenchResult:
    cells: list[BenchCell] = field(default_factory=list)
    r2_m2: float = float("nan")
    r2_d: float = float("nan")

    def time_of(self, m2: int, d: int) -> float:
        for cell in self.cells:
            if cell.m2 == m2 and cell.d == d:
                return cell.seconds
        raise KeyError((m2, d))

    def ratios(self, axis: str) -> list[float]:
        """Time ratios between consecutive grid values along ``axis`` ("m2" or "d")."""
        m2s = sorted({c.m2 for c in self.cells})
        ds = sorted({c.d for c in self.cells})
        if axis == "m2":
            return [self.time_of(b, d) / self.time_of(a, d) for d in ds for a, b in zip(m2s, m2s[1:])]
        return [self.time_of(m, b) / self.time_of(m, a) for m in m2s for a, b in zip(ds, ds[1:])]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"m2": c.m2, "d": c.d, "seconds": c.seconds} for c in self.cells], columns=["m2", "d", "seconds"]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "cells": [{"m2": c.m2, "d": c.d, "seconds": c.seconds} for c in self.cells],
            "r2_m2": self.r2_m2,
            "r2_d": self.r2_d,
        }


def _bench_model(m2: int, d: int, k: int, rng: np.random.Generator) -> OditModel:
    refs = rng.random((m2, d))
    k = min(k, m2)
    return OditModel(
        reference_set=refs,
        baseline_stat=1.0,
        normalization=NormalizationMap(np.ones(d)),
        config=DetectorConfig(k=k, m1=1, m2=refs.shape[0]),
    )


def time_evidence(model: OditModel, points: np.ndarray, reps: int) -> float:
    """Median wall time of one evidence computation over ``reps`` timed blocks."""
    samples = []
    for r in range(reps):
        block = points[(r * BLOCK) % points.shape[0] :][:BLOCK]
        start = time.perf_counter()
        evidence_batch(model, block)
        samples.append((time.perf_counter() - start) / block.shape[0])
    return float(np.median(samples))


def _axis_r2(result: BenchResult, axis: str) -> float:
    m2s = sorted({c.m2 for c in result.cells})
    ds = sorted({c.d for c in result.cells})
    fits = []
    if axis == "m2":
        for d in ds:
            fits.append(linregress(m2s, [result.time_of(m, d) for m in m2s]).rvalue ** 2)
    else:
        for m in m2s:
            fits.append(linregress(ds, [result.time_of(m, d) for d in ds]).rvalue ** 2)
    return float(min(fits))


def scaling_bench(
    cfg: BenchConfig,
    seed: int = 0,
    m2_grid: Sequence[int] | None = None,
    d_grid: Sequence[int] | None = None,
) -> BenchResult:
    m2_grid = list(m2_grid or cfg.m2_grid)
    d_grid = list(d_grid or cfg.d_grid)
    if len(m2_grid) < 2 or len(d_grid) < 2:
        raise DataValidationError("Scaling grids need at least two points per axis")

    result = BenchResult()
    for m2 in m2_grid:
        for d in d_grid:
            rng = rng_for(seed, STREAM_BENCH, m2, d)
            model = _bench_model(m2, d, cfg.k, rng)
            points = rng.random((BLOCK * 4, d))
            evidence_batch(model, points[:BLOCK])  # warm-up
            seconds = time_evidence(model, points, cfg.reps)
            result.cells.append(BenchCell(m2=m2, d=d, seconds=seconds))
            logger.debug(f"m2={m2} d={d}: {seconds * 1e6:.2f} us per evidence")

    result.r2_m2 = _axis_r2(result, "m2")
    result.r2_d = _axis_r2(result, "d")
    return result


def write_bench_csv(path: str | Path, result: BenchResult) -> Path:
    path = ensure_parent_directory(path)
    result.to_frame().to_csv(path, index=False)
    return path
