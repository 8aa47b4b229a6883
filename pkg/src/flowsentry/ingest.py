"""Flow-stream ingestion: CSV parsing, train-fitted preprocessing, chronological splits.

Feature scaling and one-hot vocabularies are fit on the training split only and
then applied unchanged to validation/test, so nothing downstream ever sees
information from the future part of the stream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DataError


@dataclass(frozen=True)
class FlowRecord:
    """One timestamped feature vector with an optional binary label.

    Timestamps are event time in fractional minutes and must be non-decreasing
    within a stream.
    """

    timestamp: float
    features: np.ndarray
    label: int | None = None


@dataclass(frozen=True)
class StreamSchema:
    """Column roles for a flow CSV. The header row is required."""

    timestamp: str
    features: tuple[str, ...]
    categoricals: tuple[str, ...] = ()
    label: str | None = None
    drop: tuple[str, ...] = ()


class FlowStream:
    """A fully numeric flow stream stored column-wise.

    Timestamps must be non-decreasing; feature dimension is constant.
    Instances are treated as immutable after construction.
    """

    def __init__(self, timestamps, features, labels=None):
        self.timestamps = np.asarray(timestamps, dtype=np.float64)
        self.features = np.asarray(features, dtype=np.float64)
        if self.features.ndim != 2 or len(self.features) != len(self.timestamps):
            raise ValueError("features must be a 2-D array with one row per timestamp")
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        if self.labels is not None and len(self.labels) != len(self.timestamps):
            raise ValueError("labels length does not match the stream")
        regress = np.nonzero(np.diff(self.timestamps) < 0)[0]
        if regress.size:
            raise DataError(f"timestamps regress at record {int(regress[0]) + 1}")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def slice(self, start: int, stop: int) -> "FlowStream":
        labels = None if self.labels is None else self.labels[start:stop]
        return FlowStream(self.timestamps[start:stop], self.features[start:stop], labels)

    def records(self) -> Iterator[FlowRecord]:
        for i in range(len(self)):
            label = None if self.labels is None else int(self.labels[i])
            yield FlowRecord(float(self.timestamps[i]), self.features[i], label)


@dataclass
class RawStream:
    """Parsed but not yet preprocessed stream: numeric columns plus raw categorical strings."""

    timestamps: np.ndarray
    numeric: np.ndarray
    categorical: list[tuple[str, ...]]
    labels: np.ndarray | None
    schema: StreamSchema

    def __len__(self) -> int:
        return len(self.timestamps)


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"row {row}: non-numeric value {cell!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: non-finite value {cell!r} in column {column!r}")
    return value


def _parse_label(cell: str, row: int, column: str) -> int:
    value = _parse_float(cell, row, column)
    if value not in (0.0, 1.0):
        raise DataError(f"row {row}: label must be 0 or 1, got {cell!r}")
    return int(value)


def load_stream(path, schema: StreamSchema) -> RawStream:
    """Parse a flow CSV into a RawStream.

    Records are kept in file order. Any unparseable cell rejects the whole load
    with a DataError naming the offending row (1-based, excluding the header).
    """
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open stream file {path}: {exc}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        index: dict[str, int] = {}
        for pos, name in enumerate(header):
            index[name.strip()] = pos
        needed = [schema.timestamp, *schema.features, *schema.categoricals]
        if schema.label is not None:
            needed.append(schema.label)
        for name in needed:
            if name not in index:
                raise DataError(f"{path}: column {name!r} missing from header")

        ts_pos = index[schema.timestamp]
        feat_pos = [index[c] for c in schema.features]
        cat_pos = [index[c] for c in schema.categoricals]
        label_pos = index[schema.label] if schema.label is not None else None

        timestamps: list[float] = []
        numeric: list[list[float]] = []
        categorical: list[tuple[str, ...]] = []
        labels: list[int] = []
        width = len(header)
        for row_no, row in enumerate(reader, start=1):
            if len(row) != width:
                raise DataError(f"row {row_no}: expected {width} columns, got {len(row)}")
            timestamps.append(_parse_float(row[ts_pos], row_no, schema.timestamp))
            numeric.append([_parse_float(row[p], row_no, header[p]) for p in feat_pos])
            categorical.append(tuple(row[p].strip() for p in cat_pos))
            if label_pos is not None:
                labels.append(_parse_label(row[label_pos], row_no, schema.label))

    ts = np.asarray(timestamps, dtype=np.float64)
    regress = np.nonzero(np.diff(ts) < 0)[0]
    if regress.size:
        raise DataError(f"row {int(regress[0]) + 2}: timestamp regresses")
    num = np.asarray(numeric, dtype=np.float64).reshape(len(ts), len(feat_pos))
    lab = np.asarray(labels, dtype=np.int64) if label_pos is not None else None
    return RawStream(ts, num, categorical, lab, schema)


class FlowPreprocessor(BaseEstimator, TransformerMixin):
    """Min-max scaling of numeric features plus one-hot encoding of categoricals.

    Ranges and vocabularies come from the stream passed to ``fit`` (the training
    split). ``transform`` clips out-of-range numerics to [0, 1], maps constant
    training features to 0.0, and encodes unseen categories as all-zeros.
    """

    def fit(self, raw: RawStream, y=None) -> "FlowPreprocessor":
        if len(raw) == 0:
            raise ValueError("cannot fit preprocessing on an empty stream")
        self.mins_ = raw.numeric.min(axis=0) if raw.numeric.size else np.zeros(0)
        self.maxs_ = raw.numeric.max(axis=0) if raw.numeric.size else np.zeros(0)
        self.constant_ = self.maxs_ <= self.mins_
        n_cat = len(raw.schema.categoricals)
        self.vocabularies_ = []
        for j in range(n_cat):
            seen = sorted({cats[j] for cats in raw.categorical})
            self.vocabularies_.append(tuple(seen))
        self.output_dim_ = int(raw.numeric.shape[1] + sum(len(v) for v in self.vocabularies_))
        return self

    def transform(self, raw: RawStream) -> FlowStream:
        if not hasattr(self, "mins_"):
            raise ValueError("preprocessor is not fitted")
        if raw.numeric.shape[1] != len(self.mins_):
            raise DataError(
                f"numeric dimension {raw.numeric.shape[1]} does not match fitted {len(self.mins_)}"
            )
        if any(len(cats) != len(self.vocabularies_) for cats in raw.categorical):
            raise DataError("categorical arity does not match fitted schema")
        span = np.where(self.constant_, 1.0, self.maxs_ - self.mins_)
        scaled = (raw.numeric - self.mins_) / span
        scaled[:, self.constant_] = 0.0
        np.clip(scaled, 0.0, 1.0, out=scaled)
        blocks = [scaled]
        for j, vocab in enumerate(self.vocabularies_):
            lookup = {c: k for k, c in enumerate(vocab)}
            onehot = np.zeros((len(raw), len(vocab)))
            for i, cats in enumerate(raw.categorical):
                k = lookup.get(cats[j])
                if k is not None:
                    onehot[i, k] = 1.0
            blocks.append(onehot)
        features = np.hstack(blocks) if blocks else scaled
        return FlowStream(raw.timestamps, features, raw.labels)


@dataclass(frozen=True)
class SplitIndices:
    """Chronological 70/15/15-style boundaries: [0, n_train), [n_train, n_train+n_val), rest."""

    n_train: int
    n_val: int
    n_test: int

    @property
    def total(self) -> int:
        return self.n_train + self.n_val + self.n_test


def chronological_split(n: int, ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)) -> SplitIndices:
    """Split sizes for a time-sorted stream: floor(train), floor(val), remainder to test.

    Every split must be non-empty.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_train = int(math.floor(ratios[0] * n))
    n_val = int(math.floor(ratios[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"stream of {n} records is too small for a non-empty {ratios} split")
    return SplitIndices(n_train, n_val, n_test)


def split_stream(stream: FlowStream, ratios=(0.70, 0.15, 0.15)):
    """Partition a time-sorted FlowStream into contiguous train/validation/test streams."""
    idx = chronological_split(len(stream), ratios)
    train = stream.slice(0, idx.n_train)
    val = stream.slice(idx.n_train, idx.n_train + idx.n_val)
    test = stream.slice(idx.n_train + idx.n_val, idx.total)
    return train, val, test


def split_raw(raw: RawStream, ratios=(0.70, 0.15, 0.15)):
    """Like split_stream but on a RawStream, so preprocessing can be fit on train only."""
    idx = chronological_split(len(raw), ratios)
    parts = []
    bounds = [(0, idx.n_train), (idx.n_train, idx.n_train + idx.n_val), (idx.n_train + idx.n_val, idx.total)]
    for lo, hi in bounds:
        labels = None if raw.labels is None else raw.labels[lo:hi]
        parts.append(RawStream(raw.timestamps[lo:hi], raw.numeric[lo:hi], raw.categorical[lo:hi], labels, raw.schema))
    return tuple(parts)


def interleave_round_robin(streams: list[FlowStream]) -> FlowStream:
    """Merge k time-sorted sub-streams by cycling one record per source.

    Utility for the synthetic generators; single-file ingestion never needs it.
    The merged timestamps are re-emitted in merged order, so the result is only
    guaranteed time-sorted if the sources cover disjoint or aligned ranges.
    """
    if not streams:
        raise ValueError("need at least one stream")
    dim = streams[0].dim
    if any(s.dim != dim for s in streams):
        raise ValueError("streams differ in feature dimension")
    labeled = all(s.labeled for s in streams)
    order: list[tuple[int, int]] = []
    cursors = [0] * len(streams)
    remaining = sum(len(s) for s in streams)
    while remaining:
        for k, s in enumerate(streams):
            if cursors[k] < len(s):
                order.append((k, cursors[k]))
                cursors[k] += 1
                remaining -= 1
    ts = np.array([streams[k].timestamps[i] for k, i in order])
    feats = np.vstack([streams[k].features[i] for k, i in order])
    labels = np.array([streams[k].labels[i] for k, i in order]) if labeled else None
    ordering = np.argsort(ts, kind="stable")
    return FlowStream(ts[ordering], feats[ordering], None if labels is None else labels[ordering])
