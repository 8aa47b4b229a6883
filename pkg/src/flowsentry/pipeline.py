"""End-to-end orchestration: score -> calibrate -> threshold -> burn-rate escalation.

The fit phase streams the detector through train and validation in one
continuous pass (no state reset at split boundaries), fits the calibrator on
the non-warm-up validation flows, and derives both decision thresholds from the
calibrated validation negatives. The stream phase then continues the same
detector state through test, converting each flow into a budget event and an
escalation decision while recording per-flow latency.

Ablation variants share one scoring pass and differ only post hoc:

    V1  calibrated (isotonic) scores + budgeted threshold
    V2  raw scores            + budgeted threshold
    V3  calibrated (isotonic) scores + cost threshold
    V4  raw scores            + cost threshold
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import calibrate, decide, metrics
from .bocpd import BocpdDetector, ScoredFlow
from .burnrate import DEFAULT_ALERT_LEVELS, BudgetConfig, BurnRateMonitor, NO_ALERT
from .calibrate import CalibrationMap
from .decide import CostSpec, DecisionThresholds
from .ingest import FlowStream

VARIANTS = {
    "V1": (calibrate.ISOTONIC, "crc"),
    "V2": (calibrate.IDENTITY, "crc"),
    "V3": (calibrate.ISOTONIC, "cost"),
    "V4": (calibrate.IDENTITY, "cost"),
}

THRESHOLD_MODES = ("variant", "cost", "crc", "conservative")


@dataclass(frozen=True)
class ActiveRule:
    """The threshold actually applied per flow; tau None means never alert."""

    tau: float | None
    tie_rule: str
    source: str

    def crossed(self, p_hat: float) -> int:
        if self.tau is None:
            return 0
        return int(decide.classify(p_hat, self.tau, self.tie_rule))


@dataclass
class FittedArtifacts:
    calibration: CalibrationMap
    thresholds: DecisionThresholds
    rule: ActiveRule
    validation_scores: list[ScoredFlow]
    train_flows: int
    validation_flows: int


@dataclass(frozen=True)
class FlowOutcome:
    timestamp: float
    score: float
    p_hat: float
    crossed: int
    level: str
    warmup: bool
    label: int | None


@dataclass
class StreamResult:
    """Column-wise outcome of the stream phase plus per-flow wall times."""

    timestamps: np.ndarray
    scores: np.ndarray
    p_hat: np.ndarray
    crossed: np.ndarray
    levels: list[str]
    warmup: np.ndarray
    labels: np.ndarray | None
    level_burns: list[list]
    durations_s: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def outcomes(self) -> list[FlowOutcome]:
        out = []
        for i in range(len(self)):
            label = None if self.labels is None else int(self.labels[i])
            out.append(FlowOutcome(float(self.timestamps[i]), float(self.scores[i]),
                                   float(self.p_hat[i]), int(self.crossed[i]),
                                   self.levels[i], bool(self.warmup[i]), label))
        return out

    def latency_stats(self) -> dict:
        total = float(self.durations_s.sum())
        p50, p95, p99 = np.percentile(self.durations_s, [50, 95, 99])
        return {
            "flows": int(len(self)),
            "p50_ms": float(p50 * 1e3),
            "p95_ms": float(p95 * 1e3),
            "p99_ms": float(p99 * 1e3),
            "mean_ms": float(self.durations_s.mean() * 1e3),
            "events_per_second": float(len(self) / total) if total > 0 else float("inf"),
        }


def _scored_arrays(scored: list[ScoredFlow]):
    scores = np.array([f.score for f in scored])
    warm = np.array([f.warmup for f in scored], dtype=bool)
    labels = None
    if scored and scored[0].label is not None:
        labels = np.array([f.label for f in scored], dtype=np.int64)
    return scores, warm, labels


def _fit_pairs(scored: list[ScoredFlow]):
    """Calibration pairs from validation: labeled, non-warm-up flows only."""
    scores, warm, labels = _scored_arrays(scored)
    if labels is None:
        return None, None
    keep = ~warm
    return scores[keep], labels[keep]


class AlertPipeline(BaseEstimator):
    """Variant-configurable alerting pipeline with an estimator-style fit/stream API.

    `seed` is recorded for run-protocol symmetry only; the pipeline is
    deterministic and the value never influences any computation.
    """

    def __init__(self, variant: str = "V1", cost_ratio: float = 10.0, alpha: float = 0.01,
                 max_run_length: int = 500, hazard: float = 1e-3, variance_floor: float = 1e-4,
                 warmup_flows: int = 30, prior_mean: float = 0.5, prior_var: float = 1.0 / 12.0,
                 budget_events: float = 50.0, budget_period_minutes: float = 60.0,
                 levels=DEFAULT_ALERT_LEVELS, threshold_mode: str = "variant", seed: int = 11):
        self.variant = variant
        self.cost_ratio = cost_ratio
        self.alpha = alpha
        self.max_run_length = max_run_length
        self.hazard = hazard
        self.variance_floor = variance_floor
        self.warmup_flows = warmup_flows
        self.prior_mean = prior_mean
        self.prior_var = prior_var
        self.budget_events = budget_events
        self.budget_period_minutes = budget_period_minutes
        self.levels = levels
        self.threshold_mode = threshold_mode
        self.seed = seed

    def _check_config(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")

    def _resolve_rule(self, thresholds: DecisionThresholds) -> ActiveRule:
        calibrator_kind, default_source = VARIANTS[self.variant]
        source = self.threshold_mode if self.threshold_mode != "variant" else default_source
        if source == "cost":
            return ActiveRule(thresholds.tau_star, decide.STRICT, "cost")
        if source == "crc":
            tau = thresholds.tau_crc if thresholds.feasible else None
            return ActiveRule(tau, decide.INCLUSIVE, "crc")
        # conservative: the larger of the two cutoffs; an infeasible budget wins.
        if thresholds.feasible is None:
            raise ValueError("conservative mode needs the budgeted threshold; validation labels required")
        if not thresholds.feasible:
            return ActiveRule(None, decide.INCLUSIVE, "conservative")
        if thresholds.tau_crc >= thresholds.tau_star:
            return ActiveRule(thresholds.tau_crc, decide.INCLUSIVE, "conservative")
        return ActiveRule(thresholds.tau_star, decide.STRICT, "conservative")

    def fit(self, train: FlowStream, validation: FlowStream) -> "AlertPipeline":
        """Warm the detector over train, score validation, fit calibrator and thresholds."""
        self._check_config()
        calibrator_kind, default_source = VARIANTS[self.variant]
        needs_crc = (self.threshold_mode in ("crc", "conservative")
                     or (self.threshold_mode == "variant" and default_source == "crc"))
        needs_labels = needs_crc or calibrator_kind != calibrate.IDENTITY

        self.detector_ = BocpdDetector(
            dim=train.dim, max_run_length=self.max_run_length, hazard=self.hazard,
            variance_floor=self.variance_floor, warmup_flows=self.warmup_flows,
            prior_mean=self.prior_mean, prior_var=self.prior_var)
        self.detector_.score_stream(train.features)
        val_scored = self.detector_.score_flows(validation)

        fit_scores, fit_labels = _fit_pairs(val_scored)
        if needs_labels and fit_labels is None:
            raise ValueError(f"variant {self.variant} requires a labeled validation split")
        calibration = calibrate.fit_calibration(calibrator_kind, fit_scores, fit_labels)

        costs = CostSpec.from_ratio(self.cost_ratio)
        if fit_labels is not None and np.any(fit_labels == 0):
            neg_calibrated = calibration.apply(fit_scores[fit_labels == 0])
            thresholds = decide.build_thresholds(costs, neg_calibrated, self.alpha)
        else:
            if needs_crc:
                raise ValueError("budgeted threshold requires labeled validation negatives")
            thresholds = decide.build_thresholds(costs)

        self.calibration_ = calibration
        self.thresholds_ = thresholds
        self.rule_ = self._resolve_rule(thresholds)
        self.artifacts_ = FittedArtifacts(
            calibration=calibration, thresholds=thresholds, rule=self.rule_,
            validation_scores=val_scored, train_flows=len(train), validation_flows=len(validation))
        return self

    def stream(self, test: FlowStream) -> StreamResult:
        """Continue the fitted detector through test, one alert decision per flow."""
        if not hasattr(self, "detector_"):
            raise ValueError("pipeline is not fitted")
        if test.dim != self.detector_.dim:
            raise ValueError(f"test dimension {test.dim} does not match fitted {self.detector_.dim}")
        budget = BudgetConfig(self.budget_events, self.budget_period_minutes)
        monitor = BurnRateMonitor(budget, self.levels)
        detector = self.detector_
        calibration = self.calibration_
        rule = self.rule_
        w0 = int(self.warmup_flows)

        n = len(test)
        scores = np.empty(n)
        p_hat = np.empty(n)
        crossed = np.zeros(n, dtype=np.int64)
        warmup = np.zeros(n, dtype=bool)
        levels: list[str] = []
        level_burns: list[list] = []
        durations = np.empty(n)
        features = test.features
        timestamps = test.timestamps

        for i in range(n):
            start = time.perf_counter()
            warm = detector.flows_seen < w0
            s = detector.update(features[i])
            p = calibration.apply(s)
            z = 0 if warm else rule.crossed(p)
            monitor.record_event(float(timestamps[i]), z)
            burns = monitor.level_burns()
            level = NO_ALERT
            if not warm:
                for entry in burns:
                    if entry.fired:
                        level = entry.name
                        break
            durations[i] = time.perf_counter() - start

            scores[i] = s
            p_hat[i] = p
            crossed[i] = z
            warmup[i] = warm
            levels.append(level)
            level_burns.append(burns)

        return StreamResult(timestamps=timestamps.copy(), scores=scores, p_hat=p_hat,
                            crossed=crossed, levels=levels, warmup=warmup,
                            labels=None if test.labels is None else test.labels.copy(),
                            level_burns=level_burns, durations_s=durations)


@dataclass(frozen=True)
class VariantRow:
    """One ablation table row; tau is None when the budgeted threshold is infeasible."""

    variant: str
    tau: float | None
    alert_rate: float
    fpr: float
    recall: float
    precision: float
    f1: float


@dataclass
class AblationResult:
    rows: list[VariantRow]
    val_scored: list[ScoredFlow]
    test_scored: list[ScoredFlow]


def run_ablation(train: FlowStream, validation: FlowStream, test: FlowStream,
                 cost_ratio: float = 10.0, alpha: float = 0.01,
                 variants=("V1", "V2", "V3", "V4"), **detector_params) -> AblationResult:
    """Score once, then evaluate every requested variant post hoc on the shared scores."""
    if test.labels is None or validation.labels is None:
        raise ValueError("ablation requires labeled validation and test splits")
    for name in variants:
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}")

    detector = BocpdDetector(dim=train.dim, **detector_params)
    detector.score_stream(train.features)
    val_scored = detector.score_flows(validation)
    test_scored = detector.score_flows(test)

    fit_scores, fit_labels = _fit_pairs(val_scored)
    test_scores, test_warm, test_labels = _scored_arrays(test_scored)
    costs = CostSpec.from_ratio(cost_ratio)

    rows = []
    for name in variants:
        calibrator_kind, source = VARIANTS[name]
        calibration = calibrate.fit_calibration(calibrator_kind, fit_scores, fit_labels)
        if source == "crc":
            neg = calibration.apply(fit_scores[fit_labels == 0])
            crc = decide.crc_threshold(neg, alpha)
            tau, tie_rule = (crc.tau, decide.INCLUSIVE) if crc.feasible else (None, decide.INCLUSIVE)
        else:
            tau, tie_rule = decide.cost_threshold(costs), decide.STRICT

        p = calibration.apply(test_scores)
        if tau is None:
            alerts = np.zeros(len(p), dtype=bool)
        else:
            alerts = decide.classify(p, tau, tie_rule)
        alerts &= ~test_warm
        rates = metrics.confusion_at(alerts.astype(np.float64), test_labels, 0.5, decide.STRICT)
        rows.append(VariantRow(name, tau, rates.alert_rate, rates.fpr,
                               rates.recall, rates.precision, rates.f1))
    return AblationResult(rows, val_scored, test_scored)
