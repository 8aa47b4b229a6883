"""Labeled synthetic streams for desk-scale testing.

Three scenario families:

* mean_shift: a stationary Gaussian stream whose mean jumps at a known index;
  the standard change-point detection scenario.
* burst_sustained: a mostly quiet stream carrying one short burst of
  outlier flows (transient noise, labeled benign) and a later sustained
  attack segment, sized so the burst must NOT page while the sustained
  segment drives both paging windows over threshold.
* regime: prevalence-controlled benign/attack mixture with deterministic
  round-robin attack placement, used for rare-attack and base-rate-inversion
  experiments.

All generators are pure functions of their arguments (seeded NumPy Generator),
emit timestamps in fractional minutes, and write/read through the same CSV
schema the ingest module consumes.
"""

from __future__ import annotations

import csv

import numpy as np

from .ingest import FlowStream, StreamSchema

DEFAULT_SEED = 11


def stream_schema(dim: int, labeled: bool = True) -> StreamSchema:
    """Schema of the CSV emitted by write_stream_csv for a dim-feature stream."""
    return StreamSchema(
        timestamp="timestamp",
        features=tuple(f"f{i}" for i in range(dim)),
        label="label" if labeled else None,
    )


def write_stream_csv(stream: FlowStream, path) -> None:
    """Write a FlowStream in the canonical CSV schema (floats round-trip exactly)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp"]
        if stream.labeled:
            header.append("label")
        header.extend(f"f{i}" for i in range(stream.dim))
        writer.writerow(header)
        for i in range(len(stream)):
            row = [repr(float(stream.timestamps[i]))]
            if stream.labeled:
                row.append(str(int(stream.labels[i])))
            row.extend(repr(float(v)) for v in stream.features[i])
            writer.writerow(row)


def _timestamps(n: int, flows_per_minute: float) -> np.ndarray:
    return np.arange(n, dtype=np.float64) / flows_per_minute


def gen_mean_shift(length: int = 600, change_at: int = 300, dim: int = 1,
                   base_mean: float = 0.3, sigma: float = 0.05, shift_sigmas: float = 4.0,
                   flows_per_minute: float = 60.0, seed: int = DEFAULT_SEED) -> FlowStream:
    """Gaussian stream whose per-dimension mean jumps by shift_sigmas * sigma at change_at.

    Labels are 0 before the change index and 1 from it onward.
    """
    if not 0 < change_at < length:
        raise ValueError("change_at must fall strictly inside the stream")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(seed)
    features = rng.normal(base_mean, sigma, size=(length, dim))
    features[change_at:] += shift_sigmas * sigma
    labels = np.zeros(length, dtype=np.int64)
    labels[change_at:] = 1
    return FlowStream(_timestamps(length, flows_per_minute), features, labels)


def gen_burst_sustained(duration_minutes: float = 480.0, flows_per_minute: float = 60.0,
                        dim: int = 1, benign_mean: float = 0.35, event_mean: float = 0.8,
                        sigma: float = 0.01, clip_sigmas: float = 3.0,
                        burst_start: float = 120.0, burst_minutes: float = 3.0,
                        burst_every: int = 12, sustained_start: float = 300.0,
                        sustained_every: int = 10, seed: int = DEFAULT_SEED) -> FlowStream:
    """Quiet stream + transient outlier burst + sustained attack segment.

    Benign features are Gaussian clipped at clip_sigmas so the null segment
    never crosses a cost-derived threshold on its own. During the burst window
    every `burst_every`-th flow is an outlier (labeled 0: noise); from
    sustained_start onward every `sustained_every`-th flow is an outlier
    (labeled 1: attack).

    The benign noise scale matches the detector's default variance floor, so a
    freshly reset run predicts ordinary benign jitter as well as a mature one;
    any hypothesis that absorbed an outlier carries inflated variance and is
    out-predicted through the benign gap between outliers. Outliers therefore
    never stop being surprising and each one crosses the cost-derived threshold.
    """
    if burst_minutes >= 5.0:
        raise ValueError("burst must span less than the short paging window (5 min)")
    n = int(round(duration_minutes * flows_per_minute))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=(n, dim))
    np.clip(noise, -clip_sigmas * sigma, clip_sigmas * sigma, out=noise)
    features = benign_mean + noise
    labels = np.zeros(n, dtype=np.int64)
    ts = _timestamps(n, flows_per_minute)

    in_burst = (ts >= burst_start) & (ts < burst_start + burst_minutes)
    burst_idx = np.nonzero(in_burst)[0][::burst_every]
    sustained_idx = np.nonzero(ts >= sustained_start)[0][::sustained_every]
    for idx, label in ((burst_idx, 0), (sustained_idx, 1)):
        features[idx] = event_mean + np.clip(
            rng.normal(0.0, sigma, size=(len(idx), dim)),
            -clip_sigmas * sigma, clip_sigmas * sigma)
        labels[idx] = label
    return FlowStream(ts, features, labels)


def _attack_mask(length: int, prevalence: float) -> np.ndarray:
    """Deterministic round-robin attack placement hitting the target rate exactly."""
    mask = np.zeros(length, dtype=bool)
    acc = 0.0
    for i in range(length):
        acc += prevalence
        if acc >= 1.0:
            mask[i] = True
            acc -= 1.0
    return mask


def gen_regime(length: int = 50_000, prevalence: float = 0.05, dim: int = 1,
               benign_mean: float = 0.35, sigma: float = 0.008,
               tail_fraction: float = 0.06, tail_band: tuple = (0.038, 0.080),
               attack_ramp: tuple = (0.048, 0.080, 0.75), strong_shift: float = 0.30,
               attack_mode: str = "gaussian",
               flows_per_minute: float = 60.0, seed: int = DEFAULT_SEED) -> FlowStream:
    """Prevalence-controlled benign/attack mixture stream.

    Most flows are tight Gaussians. A `tail_fraction` of flows deviate on the
    first feature by a magnitude drawn uniformly from `tail_band` (random
    sign); each tail flow is an attack with probability that ramps linearly
    from 0 to `attack_ramp[2]` as the magnitude moves across
    [attack_ramp[0], attack_ramp[1]]. Attack odds therefore rise smoothly with
    anomaly magnitude, the way real mixed traffic behaves, while small
    deviations stay overwhelmingly benign. The remaining attack budget is
    filled with unambiguous strong attacks shifted by `strong_shift` on every
    feature (or drawn from Uniform[0, 1] when attack_mode="uniform").

    Tail and strong flows share one evenly spread placement schedule so each
    lands on a quiet, recovered posterior; realized prevalence matches the
    target within a fraction of a percent. Raises if the tail alone exceeds
    the attack budget.
    """
    if not 0.0 < prevalence < 1.0:
        raise ValueError("prevalence must lie strictly inside (0, 1)")
    if attack_mode not in ("gaussian", "uniform"):
        raise ValueError(f"unknown attack_mode {attack_mode!r}")
    rng = np.random.default_rng(seed)
    features = rng.normal(benign_mean, sigma, size=(length, dim))
    labels = np.zeros(length, dtype=np.int64)

    n_tail = int(round(tail_fraction * length))
    magnitude = rng.uniform(tail_band[0], tail_band[1], size=n_tail)
    ramp_lo, ramp_hi, ramp_max = attack_ramp
    attack_prob = np.clip((magnitude - ramp_lo) / (ramp_hi - ramp_lo), 0.0, 1.0) * ramp_max
    tail_label = (rng.random(n_tail) < attack_prob).astype(np.int64)

    n_attacks = int(round(prevalence * length))
    n_strong = n_attacks - int(tail_label.sum())
    if n_strong < 0:
        raise ValueError("tail attacks alone exceed the target prevalence")

    kinds = np.array(["T"] * n_tail + ["S"] * n_strong)
    kinds = rng.permutation(kinds)
    positions = np.unique(np.round(np.linspace(1, length - 1, len(kinds))).astype(np.int64))
    kinds = kinds[: len(positions)]

    tail_pos = positions[kinds == "T"][:n_tail]
    sign = rng.choice((-1.0, 1.0), size=len(tail_pos))
    features[tail_pos, 0] = benign_mean + sign * magnitude[: len(tail_pos)]
    labels[tail_pos] = tail_label[: len(tail_pos)]

    strong_pos = positions[kinds == "S"]
    if len(strong_pos):
        if attack_mode == "uniform":
            features[strong_pos] = rng.random((len(strong_pos), dim))
        else:
            features[strong_pos] = rng.normal(benign_mean + strong_shift, sigma,
                                              size=(len(strong_pos), dim))
        labels[strong_pos] = 1

    return FlowStream(_timestamps(length, flows_per_minute), features, labels)


def gen_collapse_regime(length: int = 40_000, prevalence: float = 0.64, dim: int = 2,
                        benign_mean: float = 0.3, attack_mean: float = 0.7,
                        sigma: float = 0.02, flows_per_minute: float = 60.0,
                        seed: int = DEFAULT_SEED) -> FlowStream:
    """Base-rate-inverted stream that drives the budgeted threshold degenerate.

    Attacks dominate, so the streaming reference distribution locks onto attack
    behaviour and most benign flows look maximally surprising. Raw scores pile
    up at the top of [0, 1] for both classes, which starves the budgeted
    threshold search of usable candidates.
    """
    rng = np.random.default_rng(seed)
    attacks = _attack_mask(length, prevalence)
    features = np.where(attacks[:, None],
                        rng.normal(attack_mean, sigma, size=(length, dim)),
                        rng.normal(benign_mean, sigma, size=(length, dim)))
    return FlowStream(_timestamps(length, flows_per_minute), features, attacks.astype(np.int64))
