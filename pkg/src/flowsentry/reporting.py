"""File outputs: score dumps, outcome/alert/ablation CSVs, metrics JSON, run manifests.

Float cells are written with repr() so values round-trip exactly and reruns of a
deterministic pipeline produce byte-identical files. Wall-clock latency goes to
its own file so the primary outputs stay reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict

from . import __version__
from .bocpd import ScoredFlow
from .pipeline import StreamResult, VariantRow


def _fmt(value: float) -> str:
    return repr(float(value))


def write_scores_csv(scored: list[ScoredFlow], path) -> None:
    """Score dump: timestamp, raw score, label (empty if unlabeled), warm-up flag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "score", "label", "warmup"])
        for flow in scored:
            label = "" if flow.label is None else str(int(flow.label))
            writer.writerow([_fmt(flow.timestamp), _fmt(flow.score), label, int(flow.warmup)])


def read_scores_csv(path):
    """Read a score dump back as (timestamps, scores, labels or None, warmup)."""
    import numpy as np

    timestamps, scores, labels, warm = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            timestamps.append(float(row["timestamp"]))
            scores.append(float(row["score"]))
            labels.append(None if row["label"] == "" else int(row["label"]))
            warm.append(bool(int(row["warmup"])))
    has_labels = labels and all(v is not None for v in labels)
    return (np.array(timestamps), np.array(scores),
            np.array(labels, dtype=np.int64) if has_labels else None,
            np.array(warm, dtype=bool))


def write_outcomes_csv(result: StreamResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "score", "p_hat", "event", "level", "warmup", "label"])
        labels = result.labels
        for i in range(len(result)):
            label = "" if labels is None else str(int(labels[i]))
            writer.writerow([
                _fmt(result.timestamps[i]), _fmt(result.scores[i]), _fmt(result.p_hat[i]),
                int(result.crossed[i]), result.levels[i], int(result.warmup[i]), label,
            ])


def write_alert_log_csv(result: StreamResult, path) -> None:
    """Per-flow burn rates for every level: the plot data behind the escalation timeline."""
    level_names = [entry.name for entry in result.level_burns[0]] if result.level_burns else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp", "level"]
        for name in level_names:
            header.extend([f"{name}_b_short", f"{name}_b_long"])
        writer.writerow(header)
        for i in range(len(result)):
            row = [_fmt(result.timestamps[i]), result.levels[i]]
            for entry in result.level_burns[i]:
                row.extend([_fmt(entry.b_short), _fmt(entry.b_long)])
            writer.writerow(row)


def write_ablation_csv(rows: list[VariantRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "tau", "alert_rate", "fpr", "recall", "precision", "f1"])
        for row in rows:
            tau = "N/A" if row.tau is None else _fmt(row.tau)
            writer.writerow([row.variant, tau, _fmt(row.alert_rate), _fmt(row.fpr),
                             _fmt(row.recall), _fmt(row.precision), _fmt(row.f1)])


def write_reliability_csv(bins, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_center", "confidence", "accuracy", "count"])
        for b in bins:
            writer.writerow([_fmt(b.center), _fmt(b.confidence), _fmt(b.accuracy), b.count])


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ManifestBuilder:
    """Collects a run's config, input hashes, and output hashes into one manifest.

    Outputs registered as deterministic are hashed; re-running the same command
    must reproduce those hashes byte for byte. Timing files are recorded by
    path only.
    """

    def __init__(self, command: str, argv: list[str], params: dict):
        self._start = time.time()
        self._perf = time.perf_counter()
        self.payload = {
            "tool": "flowsentry",
            "version": __version__,
            "command": command,
            "argv": list(argv),
            "params": params,
            "inputs": {},
            "outputs": {},
            "nondeterministic_outputs": [],
        }

    def add_input(self, path) -> None:
        self.payload["inputs"][str(path)] = sha256_file(path)

    def add_output(self, path, deterministic: bool = True) -> None:
        if deterministic:
            self.payload["outputs"][str(path)] = sha256_file(path)
        else:
            self.payload["nondeterministic_outputs"].append(str(path))

    def write(self, path) -> None:
        self.payload["duration_seconds"] = time.perf_counter() - self._perf
        self.payload["started_unix"] = self._start
        write_json(self.payload, path)
