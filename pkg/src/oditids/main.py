from __future__ import annotations
import functools
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

load_dotenv()

from oditids import __version__
from oditids.config.config import FusionMode, RunConfig
from oditids.config.loader import load_config, save_resolved_config
from oditids.cooperative.aggregator import NetworkOdit, train_network
from oditids.detection.calibration import calibrate_network_threshold
from oditids.detection.events import DetectionEventType
from oditids.evaluation.bench import scaling_bench, write_bench_csv
from oditids.evaluation.harness import evaluate
from oditids.mitigation.localizer import MitigationInputs, identify
from oditids.persistence import AlarmReport, ModelBundle, write_json
from oditids.simulation.generator import Topology, generate_network, inject_attack
from oditids.simulation.trace_io import ground_truth_path, read_trace, write_ground_truth, write_trace
from oditids.ui.console import (
    get_console,
    print_alarm,
    print_bench,
    print_curves,
    print_mitigation,
    print_outputs,
    print_roc,
)
from oditids.utils.errors import EXIT_RUNTIME, DataValidationError, OditError

logger = logging.getLogger(__name__)
console = get_console()

TRACE_FILE = "trace.csv"
MODEL_FILE = "model.json"
ALARM_FILE = "alarm.json"
MITIGATION_FILE = "mitigation.json"
BENCH_FILE = "bench.csv"


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _fail(payload: dict[str, Any], exit_code: int) -> None:
    click.echo(json.dumps(payload), err=True)
    sys.exit(exit_code)


def handle_errors(fn: Callable[..., None]) -> Callable[..., None]:
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            fn(*args, **kwargs)
        except OditError as e:
            logger.debug("Command failed", exc_info=True)
            _fail(e.to_dict(), e.exit_code)
        except Exception as e:
            logger.debug("Unexpected failure", exc_info=True)
            _fail(
                {"type": e.__class__.__name__, "message": str(e), "details": {}, "cause": None, "exit_code": EXIT_RUNTIME},
                EXIT_RUNTIME,
            )

    return wrapper


def common_options(fn: Callable[..., None]) -> Callable[..., None]:
    fn = click.option("--log-level", type=str, default=None, help="Logging level (default WARNING)")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), help="Output directory")(fn)
    fn = click.option("--seed", type=int, default=None, help="Global seed")(fn)
    fn = click.option(
        "--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="TOML config file"
    )(fn)
    return fn


def resolve(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    layered = {"seed": seed, "out": str(out) if out else None, "log_level": log_level}
    layered.update(overrides or {})
    config = load_config(config_path=config_path, overrides=layered)
    setup_logging(config.log_level)
    return config


def check_paths(config: RunConfig, inputs: list[Path], outputs: list[Path]) -> None:
    errors = config.validate_paths(inputs, outputs)
    if errors:
        raise DataValidationError("; ".join(errors), details={"errors": errors})


def finish(config: RunConfig, written: list[Path]) -> None:
    written.append(save_resolved_config(config, config.out_dir))
    print_outputs(written, console)


@click.group()
@click.version_option(__version__, prog_name="oditids")
def main() -> None:
    """Sequential nonparametric detection and mitigation of stealthy DDoS attacks."""


@main.command()
@common_options
@click.option("--steps", type=int, default=None, help="Trace length in steps")
@click.option("--nodes", type=int, default=None, help="Number of nodes")
@click.option("--devices", type=int, default=None, help="Devices per node")
@click.option("--attack/--no-attack", default=None, help="Inject the configured attack")
@click.option("--workers", type=int, default=None)
@handle_errors
def simulate(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    steps: int | None,
    nodes: int | None,
    devices: int | None,
    attack: bool | None,
    workers: int | None,
) -> None:
    """Generate a multi-node IoT packet-count trace."""
    config = resolve(
        config_path,
        seed,
        out,
        log_level,
        {
            "simulation.steps": steps,
            "topology.nodes": nodes,
            "topology.devices_per_node": devices,
            "simulation.inject": attack,
            "simulation.workers": workers,
        },
    )
    topology = Topology.from_config(config.topology)
    trace = generate_network(topology, config.simulation.steps, config.seed, config.simulation.workers)
    if config.simulation.inject:
        trace = inject_attack(trace, config.attack)

    trace_path = config.out_dir / TRACE_FILE
    written = [write_trace(trace_path, trace)]
    if trace.ground_truth is not None:
        written.append(write_ground_truth(ground_truth_path(trace_path), trace.ground_truth, config.seed))
    finish(config, written)


@main.command()
@common_options
@click.argument("trace_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option(
    "--calibrate",
    "calibration_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Attack-free trace used to calibrate the global threshold",
)
@click.option("--target-fpr", type=float, default=None)
@click.option("--fusion", type=click.Choice([m.value for m in FusionMode]), default=None)
@handle_errors
def train(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    trace_path: Path,
    calibration_path: Path | None,
    target_fpr: float | None,
    fusion: str | None,
) -> None:
    """Train one ODIT model per node from an attack-free trace."""
    config = resolve(
        config_path, seed, out, log_level, {"calibration.target_fpr": target_fpr, "fusion": fusion}
    )
    model_path = config.out_dir / MODEL_FILE
    inputs = [trace_path] + ([calibration_path] if calibration_path else [])
    check_paths(config, inputs, [model_path])

    trace = read_trace(trace_path)
    detector_cfg = config.detector.model_copy(update={"seed": config.seed})
    models = train_network(list(trace.nodes), detector_cfg, legacy=config.legacy_gem)

    h = None
    if calibration_path is not None:
        nominal = read_trace(calibration_path)
        h = calibrate_network_threshold(
            models, nominal.counts(), config.calibration.target_fpr, config.fusion, config.calibration, config.seed
        )

    bundle = ModelBundle(
        models=models,
        device_ids=[list(raw.device_ids) for raw in trace.nodes],
        seed=config.seed,
        h=h,
        fusion=config.fusion.value,
    )
    finish(config, [bundle.save(model_path)])


@main.command()
@common_options
@click.argument("model_path", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("trace_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--cooperative/--single", default=None, help="Sum node statistics or alarm on any single node")
@click.option("--threshold", "threshold", type=float, default=None, help="Global alarm threshold h")
@handle_errors
def detect(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    model_path: Path,
    trace_path: Path,
    cooperative: bool | None,
    threshold: float | None,
) -> None:
    """Stream a trace through the trained detectors until the first alarm."""
    config = resolve(config_path, seed, out, log_level)
    alarm_path = config.out_dir / ALARM_FILE
    check_paths(config, [model_path, trace_path], [alarm_path])

    bundle = ModelBundle.load(model_path)
    trace = read_trace(trace_path)
    if cooperative is None:
        fusion = FusionMode(bundle.fusion)
    else:
        fusion = FusionMode.SUM if cooperative else FusionMode.MAX
    h = threshold if threshold is not None else (bundle.h if bundle.h is not None else config.detector.h)

    network = NetworkOdit(bundle.models, h=h, fusion=fusion)
    observations = network.normalize(list(trace.nodes))

    statistic: list[float] = []
    node_statistics: list[list[float]] = []
    report = AlarmReport(alarm_time=None, h=h, fusion=fusion.value, steps=0)
    for event in network.stream(observations):
        if event.type is DetectionEventType.STEP:
            statistic.append(event.data["statistic"])
            node_statistics.append(event.data["node_stats"])
        elif event.type is DetectionEventType.ALARM:
            report.alarm_time = event.t
            report.contributing = event.data["contributing"]
        report.steps = event.t
    report.statistic = statistic
    report.node_statistics = node_statistics

    print_alarm(report, console)
    finish(config, [report.save(alarm_path, config.seed)])


@main.command()
@common_options
@click.argument("model_path", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("trace_path", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("alarm_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--theta1", type=float, default=None, help="Node flag threshold")
@click.option("--theta2", type=float, default=None, help="Device flag threshold")
@click.option("--magnitude/--signed", default=None, help="Score devices by |y| instead of y")
@handle_errors
def mitigate(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    model_path: Path,
    trace_path: Path,
    alarm_path: Path,
    theta1: float | None,
    theta2: float | None,
    magnitude: bool | None,
) -> None:
    """Identify the nodes and devices behind an alarm."""
    config = resolve(
        config_path,
        seed,
        out,
        log_level,
        {"mitigation.theta1": theta1, "mitigation.theta2": theta2, "mitigation.magnitude": magnitude},
    )
    report_path = config.out_dir / MITIGATION_FILE
    check_paths(config, [model_path, trace_path, alarm_path], [report_path])

    bundle = ModelBundle.load(model_path)
    alarm = AlarmReport.load(alarm_path)
    if alarm.alarm_time is None:
        raise DataValidationError(f"{alarm_path} records no alarm to mitigate")

    trace = read_trace(trace_path)
    network = NetworkOdit(bundle.models, h=alarm.h, fusion=FusionMode(alarm.fusion))
    observations = network.normalize(list(trace.nodes))
    if alarm.alarm_time > trace.steps:
        raise DataValidationError(
            "Alarm time lies beyond the trace", details={"alarm": alarm.alarm_time, "steps": trace.steps}
        )
    trajectory = network.run([obs[: alarm.alarm_time] for obs in observations])

    inputs = MitigationInputs.from_trajectory(trajectory, alarm.alarm_time, device_ids=bundle.device_ids)
    result = identify(inputs, config.mitigation)
    print_mitigation(result, console)
    finish(config, [write_json(report_path, result.to_dict(), config.seed)])


@main.command(name="evaluate")
@common_options
@click.option("--trials", type=int, default=None)
@click.option("--workers", type=int, default=None)
@handle_errors
def evaluate_cmd(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    trials: int | None,
    workers: int | None,
) -> None:
    """ADD-vs-FPR curves and mitigation ROC for ODIT and the baselines."""
    config = resolve(
        config_path, seed, out, log_level, {"evaluation.trials": trials, "evaluation.workers": workers}
    )
    result = evaluate(config)
    print_curves(result.curves.values(), config.calibration.target_fpr, console)
    if result.roc:
        print_roc(result.roc, console)
    finish(config, result.write(config.out_dir, config.seed))


@main.command()
@common_options
@click.option("--reps", type=int, default=None)
@handle_errors
def bench(
    config_path: Path | None,
    seed: int | None,
    out: Path | None,
    log_level: str | None,
    reps: int | None,
) -> None:
    """Per-evidence time over a grid of reference-set sizes and dimensions."""
    config = resolve(config_path, seed, out, log_level, {"bench.reps": reps})
    result = scaling_bench(config.bench, seed=config.seed)
    print_bench(result, console)
    written = [
        write_bench_csv(config.out_dir / BENCH_FILE, result),
        write_json(config.out_dir / "bench.json", result.to_dict(), config.seed),
    ]
    finish(config, written)


if __name__ == "__main__":
    main()
