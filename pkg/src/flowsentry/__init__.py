"""flowsentry: streaming change-point alerting with calibrated, budget-controlled
thresholds and multi-window burn-rate escalation."""

__version__ = "0.1.0"

from .bocpd import BocpdDetector, ScoredFlow
from .burnrate import (
    DEFAULT_ALERT_LEVELS,
    AlertLevel,
    BudgetConfig,
    BurnRateMonitor,
    burn_rate,
)
from .calibrate import CalibrationMap, ScoreCalibrator, fit_isotonic, fit_platt
from .decide import (
    CostSpec,
    DecisionThresholds,
    build_thresholds,
    classify,
    collapse_diagnostics,
    cost_threshold,
    crc_threshold,
    overshoot_bound,
)
from .exceptions import DataError
from .ingest import (
    FlowPreprocessor,
    FlowRecord,
    FlowStream,
    SplitIndices,
    StreamSchema,
    chronological_split,
    load_stream,
    split_stream,
)
from .metrics import EvalReport, auc_pr, auc_roc, brier, confusion_at, ece, evaluate, log_loss
from .pipeline import AlertPipeline, FlowOutcome, StreamResult, run_ablation

__all__ = [
    "AlertLevel",
    "AlertPipeline",
    "BocpdDetector",
    "BudgetConfig",
    "BurnRateMonitor",
    "CalibrationMap",
    "CostSpec",
    "DataError",
    "DecisionThresholds",
    "DEFAULT_ALERT_LEVELS",
    "EvalReport",
    "FlowOutcome",
    "FlowPreprocessor",
    "FlowRecord",
    "FlowStream",
    "ScoreCalibrator",
    "ScoredFlow",
    "SplitIndices",
    "StreamResult",
    "StreamSchema",
    "auc_pr",
    "auc_roc",
    "brier",
    "build_thresholds",
    "burn_rate",
    "chronological_split",
    "classify",
    "collapse_diagnostics",
    "confusion_at",
    "cost_threshold",
    "crc_threshold",
    "ece",
    "evaluate",
    "fit_isotonic",
    "fit_platt",
    "load_stream",
    "log_loss",
    "overshoot_bound",
    "run_ablation",
    "split_stream",
]
