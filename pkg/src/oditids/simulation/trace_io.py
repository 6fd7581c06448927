"""Trace files.

A trace is a long-format CSV with header ``t,node,device,count`` and one row
per (t, node, device). ``t`` runs from 0 without gaps, nodes are integer
indices, and devices keep the order of their first appearance within a node.
The same schema serves simulated and externally produced counts.
"""

from __future__ import annotations
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from oditids.detection.trace import RawTrace
from oditids.persistence import read_json, write_json
from oditids.simulation.generator import GroundTruth, TrafficTrace
from oditids.utils.errors import DataValidationError
from oditids.utils.paths import ensure_parent_directory

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "node", "device", "count"]


def trace_frame(trace: TrafficTrace) -> pd.DataFrame:
    frames = []
    for n, raw in enumerate(trace.nodes):
        steps, d = raw.counts.shape
        frames.append(
            pd.DataFrame(
                {
                    "t": np.repeat(np.arange(steps), d),
                    "node": n,
                    "device": np.tile(np.asarray(raw.device_ids, dtype=object), steps),
                    "count": raw.counts.reshape(-1),
                }
            )
        )
    return pd.concat(frames, ignore_index=True).sort_values(["t", "node"], kind="stable", ignore_index=True)


def write_trace(path: str | Path, trace: TrafficTrace) -> Path:
    path = ensure_parent_directory(path)
    trace_frame(trace).to_csv(path, index=False)
    logger.debug(f"Wrote {trace.steps} steps of {trace.n} nodes to {path}")
    return path


def _validate_counts(frame: pd.DataFrame) -> np.ndarray:
    counts = pd.to_numeric(frame["count"], errors="coerce")
    bad = counts.isna()
    if bad.any():
        raise DataValidationError(
            "Trace contains non-numeric counts", details={"first_row": int(bad.idxmax()) + 2}
        )
    values = counts.to_numpy(dtype=np.float64)
    fractional = values != np.round(values)
    if fractional.any():
        raise DataValidationError(
            "Trace contains non-integer counts", details={"first_row": int(np.argmax(fractional)) + 2}
        )
    negative = values < 0
    if negative.any():
        raise DataValidationError(
            "Trace contains negative counts", details={"first_row": int(np.argmax(negative)) + 2}
        )
    return values.astype(np.int64)


def _validate_index(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values) | (values != np.round(values))
    if bad.any():
        raise DataValidationError(
            f"Trace contains non-integer {column} values",
            details={"column": column, "first_row": int(np.argmax(bad)) + 2},
        )
    return values.astype(np.int64)


def frame_to_trace(frame: pd.DataFrame) -> TrafficTrace:
    if list(frame.columns) != TRACE_COLUMNS:
        raise DataValidationError(
            f"Trace header must be {','.join(TRACE_COLUMNS)}",
            details={"found": ",".join(str(c) for c in frame.columns)},
        )
    if frame.empty:
        raise DataValidationError("Trace contains no rows")

    frame = frame.assign(count=_validate_counts(frame))
    frame = frame.assign(t=_validate_index(frame, "t"), node=_validate_index(frame, "node"))
    frame = frame.assign(device=frame["device"].astype(str))

    times = np.sort(frame["t"].unique())
    if times[0] != 0 or np.any(np.diff(times) != 1):
        raise DataValidationError("Trace time index must run from 0 without gaps")
    nodes = np.sort(frame["node"].unique())
    if nodes[0] != 0 or np.any(np.diff(nodes) != 1):
        raise DataValidationError("Trace node indices must run from 0 without gaps")
    if frame.duplicated(["t", "node", "device"]).any():
        raise DataValidationError("Trace contains duplicate (t, node, device) rows")

    raws = []
    for n in nodes:
        part = frame[frame["node"] == n]
        device_ids = list(pd.unique(part["device"]))
        table = part.pivot(index="t", columns="device", values="count").reindex(index=times, columns=device_ids)
        if table.isna().any().any():
            raise DataValidationError(
                "Trace is missing (t, device) rows", details={"node": int(n)}
            )
        raws.append(RawTrace(counts=table.to_numpy(dtype=np.int64), device_ids=tuple(device_ids)))
    return TrafficTrace(nodes=tuple(raws))


def read_trace(path: str | Path) -> TrafficTrace:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"Trace file does not exist: {path}")
    try:
        frame = pd.read_csv(path, dtype={"device": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataValidationError(f"Cannot parse trace {path}: {e}", cause=e) from e
    trace = frame_to_trace(frame)
    logger.debug(f"Read {trace.steps} steps of {trace.n} nodes from {path}")
    return trace


def ground_truth_path(trace_path: str | Path) -> Path:
    trace_path = Path(trace_path)
    return trace_path.with_name(f"{trace_path.stem}.truth.json")


def write_ground_truth(path: str | Path, truth: GroundTruth, seed: int) -> Path:
    return write_json(path, truth.to_dict(), seed)


def read_ground_truth(path: str | Path) -> GroundTruth:
    return GroundTruth.from_dict(read_json(path))
