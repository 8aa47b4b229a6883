"""Post-hoc score calibration: isotonic step maps and a logistic (Platt) alternative.

Calibrators are fit once on labeled validation pairs (score, label) and applied
per flow at query time. Fitted maps are immutable and safe to share across
threads; isotonic lookups cost O(log K) in the number of breakpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import (
    as_float_array,
    check_binary_labels,
    check_finite,
    check_same_length,
    require_both_classes,
)

ISOTONIC = "isotonic"
PLATT = "platt"
IDENTITY = "identity"


@dataclass(frozen=True)
class CalibrationMap:
    """A fitted monotone map from raw score to calibrated probability.

    kind "isotonic" stores a right-continuous step function (sorted breakpoints
    with non-decreasing values); kind "platt" stores the logistic pair (a, b)
    of sigmoid(a*s + b); kind "identity" passes scores through clipped to [0, 1].
    """

    kind: str
    breakpoints: np.ndarray | None = None
    values: np.ndarray | None = None
    coef: float | None = None
    intercept: float | None = None
    converged: bool = True

    def apply(self, scores):
        """Calibrated probability for a scalar score or an array of scores."""
        scalar = np.isscalar(scores)
        s = np.atleast_1d(np.asarray(scores, dtype=np.float64))
        if self.kind == IDENTITY:
            out = np.clip(s, 0.0, 1.0)
        elif self.kind == PLATT:
            if self.coef is None or self.intercept is None:
                raise ValueError("platt map is not fitted")
            out = _sigmoid(self.coef * s + self.intercept)
        elif self.kind == ISOTONIC:
            if self.breakpoints is None or self.values is None:
                raise ValueError("isotonic map is not fitted")
            # Right-continuous step: value of the breakpoint interval containing s,
            # clamped to the first/last value outside the fitted range.
            idx = np.searchsorted(self.breakpoints, s, side="right") - 1
            np.clip(idx, 0, len(self.values) - 1, out=idx)
            out = self.values[idx]
        else:
            raise ValueError(f"unknown calibration kind {self.kind!r}")
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        payload: dict = {"kind": self.kind, "converged": bool(self.converged)}
        if self.kind == ISOTONIC:
            payload["breakpoints"] = [float(v) for v in self.breakpoints]
            payload["values"] = [float(v) for v in self.values]
        elif self.kind == PLATT:
            payload["coef"] = float(self.coef)
            payload["intercept"] = float(self.intercept)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "CalibrationMap":
        kind = payload["kind"]
        if kind == ISOTONIC:
            return cls(kind, breakpoints=np.asarray(payload["breakpoints"], dtype=np.float64),
                       values=np.asarray(payload["values"], dtype=np.float64),
                       converged=payload.get("converged", True))
        if kind == PLATT:
            return cls(kind, coef=float(payload["coef"]), intercept=float(payload["intercept"]),
                       converged=payload.get("converged", True))
        if kind == IDENTITY:
            return cls(kind)
        raise ValueError(f"unknown calibration kind {kind!r}")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CalibrationMap":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def identity_map() -> CalibrationMap:
    return CalibrationMap(IDENTITY)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _merge_duplicate_scores(scores, labels):
    """Collapse tied scores to (unique score, weighted mean label, weight) before pooling."""
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    y = labels[order].astype(np.float64)
    uniq, start = np.unique(s, return_index=True)
    sums = np.add.reduceat(y, start)
    counts = np.diff(np.append(start, len(s))).astype(np.float64)
    return uniq, sums / counts, counts


def _pool_adjacent_violators(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Least-squares non-decreasing fit via stack-based adjacent pooling, O(n)."""
    block_val: list[float] = []
    block_wt: list[float] = []
    block_len: list[int] = []
    for v, w in zip(values, weights):
        block_val.append(float(v))
        block_wt.append(float(w))
        block_len.append(1)
        while len(block_val) > 1 and block_val[-2] > block_val[-1]:
            w_merged = block_wt[-2] + block_wt[-1]
            v_merged = (block_val[-2] * block_wt[-2] + block_val[-1] * block_wt[-1]) / w_merged
            n_merged = block_len[-2] + block_len[-1]
            block_val.pop(); block_wt.pop(); block_len.pop()
            block_val[-1] = v_merged
            block_wt[-1] = w_merged
            block_len[-1] = n_merged
    fitted = np.empty(len(values))
    pos = 0
    for v, n in zip(block_val, block_len):
        fitted[pos:pos + n] = v
        pos += n
    return fitted


def fit_isotonic(scores, labels) -> CalibrationMap:
    """Fit the monotone step calibrator on (score, label) pairs.

    Duplicate scores are merged to their weighted mean label before pooling so
    the fit is deterministic under any input order. Requires both classes.
    """
    s = check_finite(as_float_array(scores, "scores"), "scores")
    y = check_binary_labels(labels)
    check_same_length(s, y, "scores", "labels")
    require_both_classes(y, "isotonic calibration")
    uniq, means, weights = _merge_duplicate_scores(s, y)
    fitted = _pool_adjacent_violators(means, weights)
    np.clip(fitted, 0.0, 1.0, out=fitted)
    return CalibrationMap(ISOTONIC, breakpoints=uniq, values=fitted)


def _log_loss_at(z: np.ndarray, y: np.ndarray) -> float:
    # mean binary log-loss of sigmoid(z); softplus keeps large |z| stable
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_platt(scores, labels, tol: float = 1e-8, max_iter: int = 100) -> CalibrationMap:
    """Fit sigmoid(a*s + b) by damped Newton on the binary log-loss.

    Starts at a = 0, b = logit(prevalence). Stops when the gradient norm drops
    below `tol`; if `max_iter` iterations pass first, the best iterate is
    returned with converged=False.
    """
    s = check_finite(as_float_array(scores, "scores"), "scores")
    y = check_binary_labels(labels).astype(np.float64)
    check_same_length(s, y, "scores", "labels")
    require_both_classes(y.astype(np.int64), "platt calibration")

    prevalence = float(y.mean())
    a = 0.0
    b = math.log(prevalence / (1.0 - prevalence))
    loss = _log_loss_at(a * s + b, y)
    converged = False
    for _ in range(max_iter):
        z = a * s + b
        p = _sigmoid(z)
        residual = p - y
        g_a = float(np.mean(residual * s))
        g_b = float(np.mean(residual))
        if math.hypot(g_a, g_b) < tol:
            converged = True
            break
        w = p * (1.0 - p)
        h_aa = float(np.mean(w * s * s)) + 1e-12
        h_ab = float(np.mean(w * s))
        h_bb = float(np.mean(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0.0:
            break
        step_a = (h_bb * g_a - h_ab * g_b) / det
        step_b = (h_aa * g_b - h_ab * g_a) / det
        # Damping: halve the Newton step until the loss does not increase.
        scale = 1.0
        for _ in range(60):
            cand_a, cand_b = a - scale * step_a, b - scale * step_b
            cand_loss = _log_loss_at(cand_a * s + cand_b, y)
            if cand_loss <= loss:
                break
            scale *= 0.5
        else:
            break
        a, b, loss = cand_a, cand_b, cand_loss
    return CalibrationMap(PLATT, coef=a, intercept=b, converged=converged)


def fit_calibration(kind: str, scores=None, labels=None) -> CalibrationMap:
    """Dispatch on calibrator kind; identity needs no data."""
    if kind == IDENTITY:
        return identity_map()
    if scores is None or labels is None:
        raise ValueError(f"{kind} calibration requires labeled (score, label) pairs")
    if kind == ISOTONIC:
        return fit_isotonic(scores, labels)
    if kind == PLATT:
        return fit_platt(scores, labels)
    raise ValueError(f"unknown calibration kind {kind!r}")


class ScoreCalibrator(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit on (scores, labels), transform scores to probabilities."""

    def __init__(self, method: str = ISOTONIC):
        self.method = method

    def fit(self, scores, labels=None) -> "ScoreCalibrator":
        self.map_ = fit_calibration(self.method, scores, labels)
        return self

    def transform(self, scores):
        if not hasattr(self, "map_"):
            raise ValueError("calibrator is not fitted")
        return self.map_.apply(scores)
