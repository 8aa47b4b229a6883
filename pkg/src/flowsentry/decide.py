"""Decision thresholds: the cost-derived cutoff and the risk-controlled alert-budget cutoff.

Two operator-facing quantities are produced from calibrated probabilities:

* `cost_threshold` converts the false-negative / false-positive cost pair into
  the expected-cost-optimal cutoff C_FP / (C_FP + C_FN); alerts use strict >.
* `crc_threshold` converts an alert budget alpha into the smallest cutoff whose
  finite-sample-adjusted validation false-positive rate fits the budget; alerts
  use >= to match the empirical FPR convention. When no cutoff fits, the rule
  degenerates to "never alert" rather than erroring.

`collapse_diagnostics` runs the two deployment checks for the documented
degeneracy modes: the finite-sample overshoot bound 2/(n0+1) against alpha, and
the empty-upper-tail check that flags a vacuously satisfied budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .validation import as_float_array, check_finite


@dataclass(frozen=True)
class CostSpec:
    """Positive misclassification costs; ratio() is C_FN / C_FP."""

    c_fp: float
    c_fn: float

    def __post_init__(self):
        if self.c_fp <= 0.0 or self.c_fn <= 0.0:
            raise ValueError("costs must be positive")

    @classmethod
    def from_ratio(cls, ratio: float) -> "CostSpec":
        if ratio <= 0.0:
            raise ValueError("cost ratio must be positive")
        return cls(c_fp=1.0, c_fn=float(ratio))

    def ratio(self) -> float:
        return self.c_fn / self.c_fp


def cost_threshold(costs: CostSpec) -> float:
    """Expected-cost-optimal alert cutoff for a calibrated probability: C_FP/(C_FP+C_FN)."""
    return costs.c_fp / (costs.c_fp + costs.c_fn)


@dataclass(frozen=True)
class CrcResult:
    """Outcome of the budgeted threshold search on validation negatives."""

    tau: float | None
    feasible: bool
    alpha: float
    n0: int


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    uniq = np.unique(scores)
    cands = [np.array([0.0]), uniq, np.array([np.nextafter(uniq[-1], np.inf), 1.0])]
    cands = np.unique(np.concatenate(cands))
    return cands[cands <= 1.0]


def crc_threshold(val_neg_scores, alpha: float) -> CrcResult:
    """Smallest cutoff whose adjusted validation FPR fits the alert budget.

    The empirical FPR at a candidate tau counts validation-negative scores >= tau.
    Candidates are {0} U sorted unique scores U {nextafter(max score)} U {1}; the
    first candidate tau with (n0/(n0+1)) * FPR(tau) + 1/(n0+1) <= alpha wins.
    Returns feasible=False (never alert) when no candidate satisfies the budget,
    which happens for every score set once alpha < 1/(n0+1).
    """
    scores = check_finite(as_float_array(val_neg_scores, "val_neg_scores"), "val_neg_scores")
    if len(scores) == 0:
        raise ValueError("validation negative set is empty")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    n0 = len(scores)
    ordered = np.sort(scores)
    cands = _candidate_thresholds(ordered)
    above = n0 - np.searchsorted(ordered, cands, side="left")
    fpr = above / n0
    bound = (n0 / (n0 + 1.0)) * fpr + 1.0 / (n0 + 1.0)
    feasible = np.nonzero(bound <= alpha)[0]
    if feasible.size == 0:
        return CrcResult(tau=None, feasible=False, alpha=float(alpha), n0=n0)
    return CrcResult(tau=float(cands[feasible[0]]), feasible=True, alpha=float(alpha), n0=n0)


@dataclass(frozen=True)
class CollapseDiagnostics:
    """The two pre-deployment degeneracy checks for a budgeted threshold."""

    overshoot_bound: float
    overshoot_ok: bool
    negatives_at_or_above: int | None
    density_collapse: bool


def overshoot_bound(n0: int) -> float:
    """Worst-case budget overshoot 2B/(n0+1) with B = 1 for the 0/1 alert loss."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    return 2.0 / (n0 + 1.0)


def collapse_diagnostics(val_neg_scores, alpha: float, crc: CrcResult) -> CollapseDiagnostics:
    """Evaluate both degeneracy checks after `crc_threshold` has run.

    The overshoot check passes when alpha sits at or above 2/(n0+1). The density
    check counts validation negatives at or above the selected cutoff: zero with
    a feasible cutoff means the budget was satisfied vacuously and the rule will
    alert on (essentially) nothing exchangeable with validation.
    """
    scores = as_float_array(val_neg_scores, "val_neg_scores")
    bound = overshoot_bound(len(scores))
    if crc.feasible and crc.tau is not None:
        at_or_above = int(np.count_nonzero(scores >= crc.tau))
        collapse = at_or_above == 0
    else:
        at_or_above = None
        collapse = False
    return CollapseDiagnostics(
        overshoot_bound=bound,
        overshoot_ok=alpha >= bound,
        negatives_at_or_above=at_or_above,
        density_collapse=collapse,
    )


STRICT = "strict"
INCLUSIVE = "inclusive"


def classify(p_hat, tau: float, tie_rule: str = STRICT):
    """Alert indicator(s) at cutoff tau.

    The cost-derived cutoff uses strict > (it comes from a strict expected-cost
    inequality); the budgeted cutoff uses >= to match its FPR convention.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    p = np.asarray(p_hat, dtype=np.float64)
    if tie_rule == STRICT:
        alerts = p > tau
    elif tie_rule == INCLUSIVE:
        alerts = p >= tau
    else:
        raise ValueError(f"unknown tie rule {tie_rule!r}")
    return bool(alerts) if np.isscalar(p_hat) else alerts


@dataclass(frozen=True)
class DecisionThresholds:
    """Both operator thresholds plus the feasibility/collapse diagnostics."""

    tau_star: float
    tau_crc: float | None
    alpha: float | None
    n0: int | None
    overshoot_bound: float | None
    feasible: bool | None
    density_collapse: bool | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_thresholds(costs: CostSpec, val_neg_scores=None, alpha: float | None = None) -> DecisionThresholds:
    """Compose the cost cutoff with (optionally) the budgeted cutoff and its diagnostics."""
    tau_star = cost_threshold(costs)
    if val_neg_scores is None or alpha is None:
        return DecisionThresholds(tau_star, None, alpha, None, None, None, None)
    crc = crc_threshold(val_neg_scores, alpha)
    diag = collapse_diagnostics(val_neg_scores, alpha, crc)
    return DecisionThresholds(
        tau_star=tau_star,
        tau_crc=crc.tau,
        alpha=crc.alpha,
        n0=crc.n0,
        overshoot_bound=diag.overshoot_bound,
        feasible=crc.feasible,
        density_collapse=diag.density_collapse,
    )
