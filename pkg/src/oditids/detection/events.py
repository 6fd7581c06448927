from __future__ import annotations
from enum import Enum
from dataclasses import dataclass, field
from typing import Any


class DetectionEventType(str, Enum):
    STEP = "step"
    ALARM = "alarm"
    END = "end"


@dataclass
class DetectionEvent:
    type: DetectionEventType
    t: int
    data: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def step(cls, t: int, statistic: float, node_stats: list[float]) -> DetectionEvent:
        return cls(
            type=DetectionEventType.STEP,
            t=t,
            data={"statistic": statistic, "node_stats": node_stats},
        )

    @classmethod
    def alarm(cls, t: int, statistic: float, contributing: list[float]) -> DetectionEvent:
        return cls(
            type=DetectionEventType.ALARM,
            t=t,
            data={"statistic": statistic, "contributing": contributing},
        )

    @classmethod
    def end(cls, t: int) -> DetectionEvent:
        return cls(type=DetectionEventType.END, t=t)
