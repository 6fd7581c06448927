from __future__ import annotations
from pathlib import Path
from typing import Iterable

from rich import box
from rich.console import Console, Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text
from rich.theme import Theme

from oditids.evaluation.bench import BenchResult
from oditids.evaluation.curves import Curve
from oditids.evaluation.roc import RocResult
from oditids.mitigation.localizer import MitigationReport
from oditids.persistence import AlarmReport

ODIT_THEME = Theme(
    {
        "info": "cyan",
        "warning": "yellow",
        "error": "bright_red bold",
        "success": "green",
        "dim": "dim",
        "muted": "grey50",
        "border": "grey35",
        "highlight": "bold cyan",
        "alarm": "bright_red bold",
        "number": "bright_white",
    }
)

_console: Console | None = None


def get_console() -> Console:
    global _console
    if _console is None:
        _console = Console(theme=ODIT_THEME, highlight=False)

    return _console


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}g}"


def _panel(body: Table | Group | Text, title: str, border: str = "border") -> Panel:
    return Panel(
        body,
        title=Text(title, style="highlight"),
        title_align="left",
        border_style=border,
        box=box.ROUNDED,
        padding=(1, 2),
    )


def print_outputs(paths: Iterable[Path], console: Console | None = None) -> None:
    console = console or get_console()
    for path in paths:
        console.print(f"[muted]wrote[/muted] {path}")


def print_alarm(report: AlarmReport, console: Console | None = None) -> None:
    console = console or get_console()
    table = Table.grid(padding=(0, 2))
    table.add_column(style="muted", justify="right", no_wrap=True)
    table.add_column(style="number")
    table.add_row("fusion", report.fusion)
    table.add_row("threshold", _fmt(report.h))
    table.add_row("steps", str(report.steps))
    if report.alarmed:
        table.add_row("alarm", Text(f"t = {report.alarm_time}", style="alarm"))
        table.add_row("statistic", _fmt(report.statistic[-1] if report.statistic else None))
    else:
        table.add_row("alarm", Text("none", style="success"))
    console.print(_panel(table, "Detection", "alarm" if report.alarmed else "border"))


def print_mitigation(report: MitigationReport, console: Console | None = None) -> None:
    console = console or get_console()
    table = Table(box=box.SIMPLE_HEAD)
    table.add_column("node", justify="right")
    table.add_column("score", justify="right")
    table.add_column("flagged devices")
    for n, node_score in enumerate(report.node_scores):
        devices = [j for m, j in report.flagged_devices if m == n]
        if report.device_ids is not None:
            names = ", ".join(report.device_ids[n][j] for j in devices)
        else:
            names = ", ".join(str(j) for j in devices)
        style = "alarm" if n in report.flagged_nodes else None
        table.add_row(str(n), _fmt(node_score), names or "-", style=style)
    header = Text(f"window [{report.onset}, {report.alarm}], {len(report.flagged_devices)} devices blocked")
    console.print(_panel(Group(header, table), "Mitigation"))


def print_curves(curves: Iterable[Curve], target_fpr: float, console: Console | None = None) -> None:
    console = console or get_console()
    table = Table(box=box.SIMPLE_HEAD)
    table.add_column("detector")
    table.add_column("h", justify="right")
    table.add_column("fpr", justify="right")
    table.add_column("add", justify="right")
    table.add_column("ci", justify="right")
    table.add_column("miss rate", justify="right")
    for curve in curves:
        point = curve.point_at_fpr(target_fpr)
        if point is None:
            table.add_row(curve.detector, "-", "-", "-", "-", "-", style="muted")
            continue
        table.add_row(
            curve.detector,
            _fmt(point.h),
            _fmt(point.fpr, 3),
            _fmt(point.add),
            _fmt(point.ci, 3),
            _fmt(point.miss_rate, 3),
        )
    console.print(_panel(table, f"Detection delay at FPR <= {target_fpr}"))


def print_roc(results: dict[str, RocResult], console: Console | None = None) -> None:
    console = console or get_console()
    table = Table(box=box.SIMPLE_HEAD)
    table.add_column("scores")
    table.add_column("auc", justify="right")
    table.add_column("devices", justify="right")
    table.add_column("attacked", justify="right")
    for name, roc in results.items():
        table.add_row(name, f"{roc.auc:.4f}", str(roc.devices), str(roc.positives))
    console.print(_panel(table, "Mitigation ROC"))


def print_bench(result: BenchResult, console: Console | None = None) -> None:
    console = console or get_console()
    table = Table(box=box.SIMPLE_HEAD)
    table.add_column("m2", justify="right")
    table.add_column("d", justify="right")
    table.add_column("us / evidence", justify="right")
    for cell in result.cells:
        table.add_row(str(cell.m2), str(cell.d), f"{cell.seconds * 1e6:.2f}")
    footer = Text(f"linear fit R^2: m2 {result.r2_m2:.3f}, d {result.r2_d:.3f}", style="muted")
    console.print(_panel(Group(table, footer), "Scaling"))
