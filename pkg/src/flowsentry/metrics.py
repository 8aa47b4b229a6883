"""Evaluation metrics: ranking (AUC-PR, AUC-ROC), thresholded confusion rates,
and probability quality (Brier, log-loss, ECE, reliability data).

AUC-PR is average precision as a step sum over descending score groups with
ties handled as one threshold; AUC-ROC is the rank statistic
P(score+ > score-) + 0.5 * P(tie). Both are invariant under strictly
increasing score transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import decide
from .validation import (
    as_float_array,
    check_binary_labels,
    check_finite,
    check_same_length,
    check_unit_interval,
    require_both_classes,
)


def _prepare(scores, labels):
    s = check_finite(as_float_array(scores, "scores"), "scores")
    y = check_binary_labels(labels)
    check_same_length(s, y, "scores", "labels")
    return s, y


def auc_pr(scores, labels) -> float:
    """Average precision with tie grouping: sum over groups of (dR) * precision."""
    s, y = _prepare(scores, labels)
    require_both_classes(y, "auc_pr")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # group boundaries: last index of each tied block
    boundary = np.nonzero(np.diff(s_sorted))[0]
    ends = np.append(boundary, len(s_sorted) - 1)
    tp = np.cumsum(y_sorted)[ends].astype(np.float64)
    pp = (ends + 1).astype(np.float64)
    n_pos = float(y.sum())
    precision = tp / pp
    recall = tp / n_pos
    d_recall = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(d_recall * precision))


def auc_roc(scores, labels) -> float:
    """Rank-based AUC: probability a positive outranks a negative, ties at half."""
    s, y = _prepare(scores, labels)
    require_both_classes(y, "auc_roc")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    ranks[order] = np.arange(1, len(s) + 1)
    # midranks for tied scores
    s_sorted = s[order]
    uniq, start = np.unique(s_sorted, return_index=True)
    stop = np.append(start[1:], len(s_sorted))
    mid = (start + 1 + stop) / 2.0
    tied_rank = np.empty(len(s_sorted))
    for b, (lo, hi) in enumerate(zip(start, stop)):
        tied_rank[lo:hi] = mid[b]
    ranks[order] = tied_rank
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class ConfusionRates:
    alert_rate: float
    fpr: float
    recall: float
    precision: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def confusion_at(scores, labels, tau: float, tie_rule: str = decide.STRICT) -> ConfusionRates:
    """Thresholded confusion rates; a zero-alert run scores precision = recall = F1 = 0."""
    s, y = _prepare(scores, labels)
    alerts = decide.classify(s, tau, tie_rule)
    tp = int(np.count_nonzero(alerts & (y == 1)))
    fp = int(np.count_nonzero(alerts & (y == 0)))
    fn = int(np.count_nonzero(~alerts & (y == 1)))
    tn = int(np.count_nonzero(~alerts & (y == 0)))
    n = len(y)
    n_pos = tp + fn
    n_neg = fp + tn
    alert_rate = (tp + fp) / n if n else 0.0
    fpr = fp / n_neg if n_neg else 0.0
    recall = tp / n_pos if n_pos else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return ConfusionRates(alert_rate, fpr, recall, precision, f1, tp, fp, fn, tn)


def brier(probs, labels) -> float:
    """Mean squared error between probabilities and binary outcomes."""
    p = check_unit_interval(as_float_array(probs, "probs"), "probs")
    y = check_binary_labels(labels)
    check_same_length(p, y, "probs", "labels")
    return float(np.mean((p - y) ** 2))


def log_loss(probs, labels, eps: float = 1e-15) -> float:
    """Mean negative log-likelihood with probabilities clipped to [eps, 1 - eps]."""
    p = check_unit_interval(as_float_array(probs, "probs"), "probs")
    y = check_binary_labels(labels)
    check_same_length(p, y, "probs", "labels")
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def _bin_indices(probs: np.ndarray, bins: int) -> np.ndarray:
    # equal-width bins on [0, 1], left-closed, last bin right-closed
    idx = np.minimum((probs * bins).astype(np.int64), bins - 1)
    return idx


def ece(probs, labels, bins: int = 15) -> float:
    """Expected calibration error over equal-width bins; empty bins contribute 0."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    p = check_unit_interval(as_float_array(probs, "probs"), "probs")
    y = check_binary_labels(labels).astype(np.float64)
    check_same_length(p, y, "probs", "labels")
    idx = _bin_indices(p, bins)
    total = 0.0
    n = len(p)
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        conf = float(p[mask].mean())
        acc = float(y[mask].mean())
        total += (n_b / n) * abs(acc - conf)
    return total


@dataclass(frozen=True)
class ReliabilityBin:
    center: float
    confidence: float
    accuracy: float
    count: int


def reliability_data(probs, labels, bins: int = 15) -> list[ReliabilityBin]:
    """Per-bin (mean probability, empirical positive rate, count) for the reliability diagram.

    Empty bins are omitted, so at most `bins` rows come back.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    p = check_unit_interval(as_float_array(probs, "probs"), "probs")
    y = check_binary_labels(labels).astype(np.float64)
    check_same_length(p, y, "probs", "labels")
    idx = _bin_indices(p, bins)
    rows = []
    for b in range(bins):
        mask = idx == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        rows.append(ReliabilityBin(
            center=(b + 0.5) / bins,
            confidence=float(p[mask].mean()),
            accuracy=float(y[mask].mean()),
            count=n_b,
        ))
    return rows


@dataclass(frozen=True)
class EvalReport:
    """Everything reported for one scored, labeled stream at one operating threshold."""

    auc_pr: float
    auc_roc: float
    f1: float
    precision: float
    recall: float
    alert_rate: float
    fpr: float
    brier: float
    ece: float
    log_loss: float
    prevalence: float
    n_pos: int
    n_neg: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(probs, labels, tau: float, tie_rule: str = decide.STRICT, bins: int = 15) -> EvalReport:
    """Full report on calibrated probabilities at the given alert threshold."""
    p = check_unit_interval(as_float_array(probs, "probs"), "probs")
    y = check_binary_labels(labels)
    check_same_length(p, y, "probs", "labels")
    require_both_classes(y, "evaluate")
    rates = confusion_at(p, y, tau, tie_rule)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return EvalReport(
        auc_pr=auc_pr(p, y),
        auc_roc=auc_roc(p, y),
        f1=rates.f1,
        precision=rates.precision,
        recall=rates.recall,
        alert_rate=rates.alert_rate,
        fpr=rates.fpr,
        brier=brier(p, y),
        ece=ece(p, y, bins),
        log_loss=log_loss(p, y),
        prevalence=n_pos / len(y),
        n_pos=n_pos,
        n_neg=n_neg,
    )
