"""Truncated Bayesian online change-point scoring for flow streams.

The detector maintains a posterior over the current run length (flows since the
last regime change), truncated to at most `max_run_length` hypotheses so that
state and per-flow cost stay O(L*d). Each hypothesis carries online Gaussian
sufficient statistics (count, per-dimension mean, per-dimension sum of squared
deviations). The per-flow anomaly score is the posterior probability that the
incoming flow starts a new run.

Update recursion, all in log space with a single exp-normalize per flow:

* growth: a run of length r extends to r+1 with probability (1 - hazard),
  weighting the new flow by the run's plug-in Gaussian predictive
  (running mean, variance floored at `variance_floor`);
* reset: a new run starts with probability `hazard`, weighting the new flow by
  the prior predictive N(prior_mean, prior_var) per dimension.

The reset hypothesis keeps prior statistics (count 0), so the hypothesis at
index r always has count r until truncation saturates. Growth past the
truncation bound collapses into the top bucket ("run length >= L") by summing
the two masses and moment-matching their Gaussians, which preserves
normalization without renormalizing away probability mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from sklearn.base import BaseEstimator

_LOG_2PI = math.log(2.0 * math.pi)
# Joint weights below 1e-300 are treated as posterior underflow.
_UNDERFLOW_LOG = math.log(1e-300)


@dataclass(frozen=True)
class ScoredFlow:
    """One scored flow: raw anomaly score plus the warm-up flag used downstream."""

    timestamp: float
    score: float
    label: int | None
    warmup: bool


class BocpdDetector(BaseEstimator):
    """Streaming run-length change-point scorer with bounded memory.

    Parameters
    ----------
    dim : int
        Feature dimension d of the preprocessed flows.
    max_run_length : int
        Truncation bound L; at most L+1 run-length hypotheses are retained.
    hazard : float
        Per-flow prior probability that a new regime begins, in (0, 1).
    variance_floor : float
        Minimum per-dimension variance entering any predictive density.
    warmup_flows : int
        Number of initial flows flagged as warm-up; scores are still produced
        but downstream layers must not alert on them.
    prior_mean, prior_var : float or array of shape (dim,)
        Per-dimension prior predictive for a fresh run. The defaults are the
        moments of Uniform[0, 1], matching min-max scaled inputs.

    A detector instance is single-writer: updates must be sequential per
    stream. Run independent streams on independent instances.
    """

    def __init__(self, dim, max_run_length=500, hazard=1e-3, variance_floor=1e-4,
                 warmup_flows=30, prior_mean=0.5, prior_var=1.0 / 12.0):
        self.dim = dim
        self.max_run_length = max_run_length
        self.hazard = hazard
        self.variance_floor = variance_floor
        self.warmup_flows = warmup_flows
        self.prior_mean = prior_mean
        self.prior_var = prior_var
        self._validate()
        self.reset()

    def _validate(self) -> None:
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if int(self.max_run_length) < 1:
            raise ValueError("max_run_length must be >= 1")
        if not 0.0 < float(self.hazard) < 1.0:
            raise ValueError("hazard must lie strictly between 0 and 1")
        if float(self.variance_floor) <= 0.0:
            raise ValueError("variance_floor must be positive")
        if int(self.warmup_flows) < 0:
            raise ValueError("warmup_flows must be >= 0")
        prior_var = np.broadcast_to(np.asarray(self.prior_var, dtype=np.float64), (self.dim,))
        if np.any(prior_var <= 0.0):
            raise ValueError("prior_var must be positive")

    def reset(self) -> "BocpdDetector":
        """Return to the no-data state: a single run-length-0 hypothesis with prior statistics."""
        d = int(self.dim)
        cap = int(self.max_run_length) + 1
        self._prior_mean = np.broadcast_to(
            np.asarray(self.prior_mean, dtype=np.float64), (d,)).copy()
        self._prior_var = np.broadcast_to(
            np.asarray(self.prior_var, dtype=np.float64), (d,)).copy()
        self._log_hazard = math.log(float(self.hazard))
        self._log_growth = math.log1p(-float(self.hazard))
        self._counts = np.zeros(cap, dtype=np.int64)
        self._means = np.zeros((cap, d), dtype=np.float64)
        self._means[0] = self._prior_mean
        self._m2 = np.zeros((cap, d), dtype=np.float64)
        self._weights = np.zeros(cap, dtype=np.float64)
        self._weights[0] = 1.0
        self._log_weights = np.full(cap, -np.inf, dtype=np.float64)
        self._log_weights[0] = 0.0
        self._n_hyp = 1
        self._t = 0
        self._underflow_resets = 0
        return self

    # -- read-only views -------------------------------------------------

    @property
    def flows_seen(self) -> int:
        return self._t

    @property
    def in_warmup(self) -> bool:
        """True while the next flow to be processed still falls in the warm-up window."""
        return self._t < int(self.warmup_flows)

    @property
    def underflow_resets(self) -> int:
        return self._underflow_resets

    @property
    def run_length_weights(self) -> np.ndarray:
        """Normalized posterior over run lengths 0..R (copy)."""
        return self._weights[: self._n_hyp].copy()

    @property
    def hypothesis_count(self) -> int:
        return self._n_hyp

    def anomaly_mass(self, k: int) -> float:
        """Posterior mass on run lengths <= k; equals the raw score at k = 0."""
        if k < 0:
            raise ValueError("k must be >= 0")
        upto = min(k + 1, self._n_hyp)
        return float(self._weights[:upto].sum())

    # -- update ----------------------------------------------------------

    def _predictive_variances(self) -> np.ndarray:
        """Floored per-dimension predictive variances for the retained hypotheses.

        Hypotheses with fewer than two observations fall back to the prior
        variance; everything is clamped at `variance_floor` before use.
        """
        n = self._n_hyp
        counts = self._counts[:n]
        denom = np.maximum(counts - 1, 1).astype(np.float64)
        var = np.where((counts < 2)[:, None], self._prior_var, self._m2[:n] / denom[:, None])
        return np.maximum(var, float(self.variance_floor))

    def update(self, x) -> float:
        """Advance the posterior with one flow and return its anomaly score.

        Raises ValueError on dimension mismatch or non-finite input. If every
        joint weight underflows, the state resets to the no-data configuration,
        `underflow_resets` increments, and the flow scores 1.0.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (int(self.dim),):
            raise ValueError(f"expected feature vector of shape ({self.dim},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("feature vector contains non-finite values")

        n = self._n_hyp
        L = int(self.max_run_length)
        means = self._means[:n]
        var = self._predictive_variances()
        diff = x - means
        loglik = -0.5 * np.sum(_LOG_2PI + np.log(var) + diff * diff / var, axis=1)

        log_joint = np.empty(n + 1)
        # Reset branch: the flow opens a new run, weighted by the prior predictive
        # (hypothesis 0 always carries prior statistics, so loglik[0] is exactly that).
        log_joint[0] = self._log_hazard + loglik[0]
        log_joint[1:] = self._log_weights[:n] + loglik + self._log_growth

        peak = float(log_joint.max())
        if peak < _UNDERFLOW_LOG:
            t = self._t
            resets = self._underflow_resets
            self.reset()
            self._t = t + 1
            self._underflow_resets = resets + 1
            return 1.0

        # The single exp-normalize of this update.
        shifted = log_joint - peak
        weights = np.exp(shifted)
        total = float(weights.sum())
        weights /= total
        log_weights = shifted - math.log(total)

        counts = self._counts[:n]
        new_counts = counts + 1
        new_means = means + diff / new_counts[:, None]
        new_m2 = self._m2[:n] + diff * (x - new_means)

        if n + 1 <= L + 1:
            top = n + 1
            self._means[1:top] = new_means
            self._m2[1:top] = new_m2
            self._counts[1:top] = new_counts
            self._weights[:top] = weights
            self._log_weights[:top] = log_weights
        else:
            # Saturating truncation: indices L and L+1 of the grown posterior merge
            # into the "run length >= L" bucket.
            top = L + 1
            w_a, w_b = float(weights[L]), float(weights[L + 1])
            mass = w_a + w_b
            frac = 0.5 if mass <= 0.0 else w_a / mass
            denom_a = max(int(new_counts[L - 1]) - 1, 1)
            denom_b = max(int(new_counts[L]) - 1, 1)
            var_a = np.maximum(new_m2[L - 1] / denom_a, 0.0)
            var_b = np.maximum(new_m2[L] / denom_b, 0.0)
            mean_a, mean_b = new_means[L - 1], new_means[L]
            merged_mean = frac * mean_a + (1.0 - frac) * mean_b
            merged_var = (frac * (var_a + mean_a**2) + (1.0 - frac) * (var_b + mean_b**2)
                          - merged_mean**2)
            np.maximum(merged_var, 0.0, out=merged_var)
            merged_count = max(int(new_counts[L - 1]), int(new_counts[L]))

            self._means[1:L] = new_means[: L - 1]
            self._m2[1:L] = new_m2[: L - 1]
            self._counts[1:L] = new_counts[: L - 1]
            self._means[L] = merged_mean
            self._m2[L] = merged_var * max(merged_count - 1, 1)
            self._counts[L] = merged_count
            self._weights[:L] = weights[:L]
            self._weights[L] = mass
            self._log_weights[:L] = log_weights[:L]
            self._log_weights[L] = np.logaddexp(log_weights[L], log_weights[L + 1])

        self._means[0] = self._prior_mean
        self._m2[0] = 0.0
        self._counts[0] = 0
        self._n_hyp = top
        self._t += 1
        return float(weights[0])

    def score_stream(self, features: np.ndarray) -> np.ndarray:
        """Update over each row of `features` in order and return the score sequence."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        out = np.empty(len(features))
        for i in range(len(features)):
            out[i] = self.update(features[i])
        return out

    def score_flows(self, stream) -> list[ScoredFlow]:
        """Score a FlowStream, attaching labels and warm-up flags per flow."""
        w0 = int(self.warmup_flows)
        scored = []
        labels = stream.labels
        for i in range(len(stream)):
            warm = self._t < w0
            s = self.update(stream.features[i])
            label = None if labels is None else int(labels[i])
            scored.append(ScoredFlow(float(stream.timestamps[i]), s, label, warm))
        return scored
