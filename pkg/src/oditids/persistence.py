from __future__ import annotations
from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Any

from oditids import __version__
from oditids.detection.model import OditModel
from oditids.utils.errors import DataValidationError, SchemaVersionError
from oditids.utils.paths import ensure_parent_directory

SCHEMA_VERSION = 1


def header(seed: int) -> dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "tool_version": __version__, "seed": seed}


def check_schema(data: dict[str, Any], source: str | Path = "document") -> None:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{source} has schema version {version}, expected {SCHEMA_VERSION}",
            details={"found": version, "expected": SCHEMA_VERSION},
        )


def write_json(path: str | Path, payload: dict[str, Any], seed: int) -> Path:
    path = ensure_parent_directory(path)
    with open(path, "w", encoding="utf-8") as fp:
        json.dump({**header(seed), **payload}, fp, indent=2)
    return path


def read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"File does not exist: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fp:
            data = json.load(fp)
    except json.JSONDecodeError as e:
        raise DataValidationError(f"Invalid JSON in {path}: {e}", cause=e) from e
    if not isinstance(data, dict):
        raise DataValidationError(f"Expected a JSON object in {path}")
    check_schema(data, path)
    return data


@dataclass
class ModelBundle:
    """Trained models of every node of a network, in node order."""

    models: list[OditModel]
    device_ids: list[list[str]]
    seed: int = 0
    h: float | None = None
    fusion: str = "sum"

    def __post_init__(self) -> None:
        if not self.models:
            raise DataValidationError("A model bundle needs at least one node model")
        if len(self.device_ids) != len(self.models):
            raise DataValidationError("Every node model needs its device ids")

    @property
    def n(self) -> int:
        return len(self.models)

    def to_dict(self) -> dict[str, Any]:
        return {
            "h": self.h,
            "fusion": self.fusion,
            "nodes": [
                {"device_ids": ids, "model": model.to_dict()}
                for ids, model in zip(self.device_ids, self.models)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelBundle:
        nodes = data["nodes"]
        return cls(
            models=[OditModel.from_dict(node["model"]) for node in nodes],
            device_ids=[list(node["device_ids"]) for node in nodes],
            seed=int(data.get("seed", 0)),
            h=None if data.get("h") is None else float(data["h"]),
            fusion=str(data.get("fusion", "sum")),
        )

    def save(self, path: str | Path) -> Path:
        return write_json(path, self.to_dict(), self.seed)

    @classmethod
    def load(cls, path: str | Path) -> ModelBundle:
        return cls.from_dict(read_json(path))


@dataclass
class AlarmReport:
    alarm_time: int | None
    h: float
    fusion: str
    steps: int
    statistic: list[float] = field(default_factory=list)
    node_statistics: list[list[float]] = field(default_factory=list)
    contributing: list[float] = field(default_factory=list)

    @property
    def alarmed(self) -> bool:
        return self.alarm_time is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "alarm_time": self.alarm_time,
            "alarmed": self.alarmed,
            "h": self.h,
            "fusion": self.fusion,
            "steps": self.steps,
            "contributing": self.contributing,
            "statistic": self.statistic,
            "node_statistics": self.node_statistics,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AlarmReport:
        alarm = data.get("alarm_time")
        return cls(
            alarm_time=None if alarm is None else int(alarm),
            h=float(data["h"]),
            fusion=str(data["fusion"]),
            steps=int(data["steps"]),
            statistic=[float(v) for v in data.get("statistic", [])],
            node_statistics=[[float(v) for v in row] for row in data.get("node_statistics", [])],
            contributing=[float(v) for v in data.get("contributing", [])],
        )

    def save(self, path: str | Path, seed: int) -> Path:
        return write_json(path, self.to_dict(), seed)

    @classmethod
    def load(cls, path: str | Path) -> AlarmReport:
        return cls.from_dict(read_json(path))
