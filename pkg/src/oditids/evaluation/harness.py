"""End-to-end comparison of ODIT and the baseline detectors on the IoT network."""

from __future__ import annotations
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from oditids.baselines.cusum import CooperativeCusum, clairvoyant_params
from oditids.baselines.filtering import FilterNetworkDetector
from oditids.baselines.gmm import fit_gcusum
from oditids.baselines.renyi import RenyiNetworkDetector
from oditids.config.config import DetectorKind, RunConfig
from oditids.cooperative.aggregator import NetworkOdit, train_network
from oditids.detection.detector import first_alarm
from oditids.detection.model import OditModel
from oditids.detection.trace import RawTrace
from oditids.evaluation.curves import (
    ATTACK_TRIAL,
    Curve,
    build_curve,
    map_ordered,
    record_paths,
    trial_seed,
    write_curve_csv,
)
from oditids.evaluation.roc import RocResult, mitigation_roc, roc_from_scores, write_roc_csv
from oditids.evaluation.scenarios import NetworkScenario
from oditids.evaluation.trials import OditSource, PathSource, SingleSource
from oditids.mitigation.localizer import MitigationInputs, MitigationReport, identify
from oditids.persistence import write_json
from oditids.utils.seeding import STREAM_TRIAL, derive_seed

logger = logging.getLogger(__name__)

TRAINING_TRACE = 2
ATTACK_TRAINING_TRACE = 3


@dataclass
class EvaluationResult:
    curves: dict[str, Curve] = field(default_factory=dict)
    roc: dict[str, RocResult] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": self.summary,
            "curves": {name: curve.to_dict() for name, curve in self.curves.items()},
            "roc": {name: roc.to_dict() for name, roc in self.roc.items()},
        }

    def write(self, out_dir: Path, seed: int) -> list[Path]:
        written = [write_curve_csv(out_dir / f"curve_{name}.csv", curve) for name, curve in self.curves.items()]
        written += [write_roc_csv(out_dir / f"roc_{name}.csv", roc) for name, roc in self.roc.items()]
        written.append(write_json(out_dir / "summary.json", self.to_dict(), seed))
        return written


def build_sources(
    cfg: RunConfig, scenario: NetworkScenario, seed: int
) -> tuple[list[PathSource], list[OditModel], FilterNetworkDetector]:
    kinds = set(cfg.evaluation.detectors)
    training = scenario.training(cfg.evaluation.training_steps, derive_seed(seed, STREAM_TRIAL, TRAINING_TRACE, 0))
    models = train_network(
        [RawTrace.from_counts(c) for c in training],
        cfg.detector.model_copy(update={"seed": seed}),
        legacy=cfg.legacy_gem,
    )
    filtering = FilterNetworkDetector.fit(training, cfg.evaluation.filter_percentile)

    sources: list[PathSource] = []
    cooperative = DetectorKind.ODIT_COOPERATIVE.value if DetectorKind.ODIT_COOPERATIVE in kinds else None
    single = DetectorKind.ODIT_SINGLE.value if DetectorKind.ODIT_SINGLE in kinds else None
    if cooperative or single:
        sources.append(OditSource(models, cooperative=cooperative, single=single))
    if DetectorKind.CUSUM in kinds:
        params = clairvoyant_params(scenario.topology.nodes, scenario.attack.rate_increase)
        sources.append(SingleSource(DetectorKind.CUSUM.value, CooperativeCusum(params)))
    if DetectorKind.GCUSUM in kinds:
        attack_training = scenario.attack_training(
            cfg.evaluation.training_steps, derive_seed(seed, STREAM_TRIAL, ATTACK_TRAINING_TRACE, 0)
        )
        fitted = [fit_gcusum(nom, att, seed=seed) for nom, att in zip(training, attack_training)]
        sources.append(SingleSource(DetectorKind.GCUSUM.value, CooperativeCusum(fitted)))
    if DetectorKind.RENYI in kinds:
        sources.append(SingleSource(DetectorKind.RENYI.value, RenyiNetworkDetector.fit(training, cfg.renyi)))
    if DetectorKind.FILTER in kinds:
        sources.append(SingleSource(DetectorKind.FILTER.value, filtering))
    return sources, models, filtering


def _mitigation_trial(
    i: int,
    cfg: RunConfig,
    scenario: NetworkScenario,
    network: NetworkOdit,
    filtering: FilterNetworkDetector,
    seed: int,
) -> tuple[MitigationReport, MitigationReport, list[NDArray[np.bool_]], NDArray[np.float64]] | None:
    """Signed and magnitude reports of one detected attack, with ground truth and filter scores."""
    trial = scenario.attacked(trial_seed(seed, ATTACK_TRIAL, i))
    trajectory = network.node_paths(trial.counts)
    alarm = first_alarm(trajectory.stats, network.h)
    if alarm is None or alarm < trial.onset or trial.truth is None:
        return None
    inputs = MitigationInputs.from_trajectory(trajectory, alarm)
    signed = identify(inputs, cfg.mitigation.model_copy(update={"magnitude": False}))
    magnitude = identify(inputs, cfg.mitigation.model_copy(update={"magnitude": True}))
    filter_scores = np.concatenate(filtering.scores(trial.counts, signed.onset, alarm))
    return signed, magnitude, trial.truth.labels(scenario.topology), filter_scores


def mitigation_rocs(
    cfg: RunConfig,
    scenario: NetworkScenario,
    models: list[OditModel],
    filtering: FilterNetworkDetector,
    h: float,
    seed: int,
) -> dict[str, RocResult]:
    network = NetworkOdit(models, h=h)
    trials = map_ordered(
        lambda i: _mitigation_trial(i, cfg, scenario, network, filtering, seed),
        cfg.evaluation.trials,
        cfg.evaluation.workers,
    )
    detected = [t for t in trials if t is not None]
    if not detected:
        logger.warning(f"No attacked trial detected at h={h:.4g}; skipping the mitigation ROC")
        return {}

    labels = [t[2] for t in detected]
    flat_labels = np.concatenate([np.concatenate(lab) for lab in labels])
    return {
        "odit": mitigation_roc([t[0] for t in detected], labels),
        "odit_magnitude": mitigation_roc([t[1] for t in detected], labels),
        "filter": roc_from_scores(np.concatenate([t[3] for t in detected]), flat_labels),
    }


def _summary(cfg: RunConfig, curves: dict[str, Curve], roc: dict[str, RocResult]) -> dict[str, Any]:
    target = cfg.calibration.target_fpr
    matched = {}
    for name, curve in curves.items():
        point = curve.point_at_fpr(target)
        matched[name] = None if point is None else {"h": point.h, "fpr": point.fpr, "add": point.add}

    def add_of(kind: DetectorKind) -> float | None:
        entry = matched.get(kind.value)
        return None if entry is None else entry["add"]

    comparisons = {}
    coop = add_of(DetectorKind.ODIT_COOPERATIVE)
    for other in (DetectorKind.ODIT_SINGLE, DetectorKind.RENYI, DetectorKind.CUSUM, DetectorKind.GCUSUM):
        value = add_of(other)
        if coop is not None and value is not None:
            comparisons[f"odit_cooperative_minus_{other.value}"] = coop - value
    return {
        "target_fpr": target,
        "trials": cfg.evaluation.trials,
        "matched": matched,
        "comparisons": comparisons,
        "auc": {name: r.auc for name, r in roc.items()},
    }


def evaluate(cfg: RunConfig) -> EvaluationResult:
    seed = cfg.seed
    scenario = NetworkScenario.from_config(cfg)
    sources, models, filtering = build_sources(cfg, scenario, seed)
    recorded = record_paths(sources, scenario, cfg.evaluation.trials, seed, cfg.evaluation.workers)
    curves = {
        name: build_curve(name, scenario, paths, cfg.evaluation.h_grid, cfg.evaluation.h_points)
        for name, paths in recorded.items()
    }

    roc: dict[str, RocResult] = {}
    reference = curves.get(DetectorKind.ODIT_COOPERATIVE.value)
    point = reference.point_at_fpr(cfg.calibration.target_fpr) if reference else None
    if point is not None:
        roc = mitigation_rocs(cfg, scenario, models, filtering, point.h, seed)
    elif reference is not None:
        logger.warning(f"No cooperative threshold reaches FPR {cfg.calibration.target_fpr}; skipping mitigation ROC")

    result = EvaluationResult(curves=curves, roc=roc, summary=_summary(cfg, curves, roc))
    logger.info(f"Evaluated {len(curves)} detectors over {cfg.evaluation.trials} trials")
    return result
