"""Dataset ingestion and booleanization.

Synthetic logic datasets (XOR/OR truth tables and noisy sampled variants),
IDX image files, CSV tabular data, and threshold/thermometer encoders that
turn real-valued features into bit vectors.  Booleanizers are fitted on the
training split only, so encodings never leak test statistics.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import BooleanSample

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataError(Exception):
    """Base class for dataset ingestion failures."""


class BadMagic(DataError):
    pass


class Truncated(DataError):
    pass


class CountMismatch(DataError):
    pass


class RaggedRow(DataError):
    pass


class NonNumericCell(DataError):
    pass


class MissingLabelColumn(DataError):
    pass


@dataclass
class BoolDataset:
    """Booleanized samples: X is (num_samples, o) of 0/1, y class indices."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    feature_names: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.uint8)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (num_samples, o) matching y")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n_features(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i):
        return BooleanSample(self.X[i], int(self.y[i]))

    def subset(self, indices):
        return BoolDataset(
            self.X[indices], self.y[indices], self.n_classes, self.feature_names
        )


@dataclass
class RawDataset:
    """Rectangular real-valued rows plus labels contiguous from 0."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    feature_names: list | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (num_samples, o) matching y")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, indices):
        return RawDataset(
            self.X[indices], self.y[indices], self.n_classes, self.feature_names
        )


_XOR_ROWS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)


def xor_truth_table():
    """The four XOR rows, each exactly once."""
    return BoolDataset(_XOR_ROWS.copy(), _XOR_ROWS[:, 0] ^ _XOR_ROWS[:, 1], 2)


def or_truth_table():
    """The four OR rows, each exactly once."""
    return BoolDataset(_XOR_ROWS.copy(), _XOR_ROWS[:, 0] | _XOR_ROWS[:, 1], 2)


def generate_xor(count, noise_rate=0.0, seed=0, distractors=0, exhaustive=False):
    """XOR samples: uniform (x1, x2), y = x1 XOR x2, label flipped w.p. noise_rate.

    `distractors` appends that many uniform-random irrelevant bits (the
    classic noisy-XOR benchmark shape).  `exhaustive` cycles the truth table
    instead of sampling, so count=4 with no noise is the table exactly once.
    """
    if not 0.0 <= noise_rate < 0.5:
        raise ValueError("noise_rate must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    if exhaustive:
        reps = -(-count // 4)
        inputs = np.tile(_XOR_ROWS, (reps, 1))[:count]
    else:
        inputs = rng.integers(0, 2, size=(count, 2), dtype=np.uint8)
    labels = (inputs[:, 0] ^ inputs[:, 1]).astype(np.int64)
    if noise_rate > 0.0:
        flips = rng.random(count) < noise_rate
        labels = labels ^ flips
    if distractors > 0:
        extra = rng.integers(0, 2, size=(count, distractors), dtype=np.uint8)
        inputs = np.hstack([inputs, extra])
    return BoolDataset(inputs, labels, 2)


def generate_or(count, seed=0):
    """OR samples: uniform (x1, x2), y = x1 OR x2."""
    rng = np.random.default_rng(seed)
    inputs = rng.integers(0, 2, size=(count, 2), dtype=np.uint8)
    return BoolDataset(inputs, (inputs[:, 0] | inputs[:, 1]).astype(np.int64), 2)


def _read_exact(f, size, path):
    data = f.read(size)
    if len(data) != size:
        raise Truncated(f"{path}: expected {size} bytes, got {len(data)}")
    return data


def load_idx(images_path, labels_path):
    """Load an IDX image/label file pair (big-endian, magic-prefixed)."""
    with open(images_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagic(
                f"{images_path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        count, rows, cols = struct.unpack(">III", _read_exact(f, 12, images_path))
        pixels = np.frombuffer(
            _read_exact(f, count * rows * cols, images_path), dtype=np.uint8
        )
    with open(labels_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagic(
                f"{labels_path}: magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        (label_count,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        labels = np.frombuffer(_read_exact(f, label_count, labels_path), dtype=np.uint8)
    if count != label_count:
        raise CountMismatch(f"{count} images but {label_count} labels")
    X = pixels.reshape(count, rows * cols).astype(np.float64)
    y = labels.astype(np.int64)
    n_classes = int(y.max()) + 1 if count else 0
    return RawDataset(X, y, n_classes)


def write_idx(images, labels, images_path, labels_path, rows=None, cols=None):
    """Write an IDX image/label pair (inverse of load_idx, used for fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count = images.shape[0]
    if labels.shape[0] != count:
        raise CountMismatch(f"{count} images but {labels.shape[0]} labels")
    if rows is None:
        side = int(round(images.shape[1] ** 0.5))
        rows, cols = side, images.shape[1] // side
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, count))
        f.write(labels.tobytes())


def load_csv(path, label_column):
    """Load an RFC-4180-style CSV with a header row; labels are factorized
    to 0..q-1 in first-appearance order, features parsed as floats."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise Truncated(f"{path}: empty file") from None
        if label_column not in header:
            raise MissingLabelColumn(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RaggedRow(
                    f"{path}:{line_no}: {len(row)} cells, expected {len(header)}"
                )
            labels.append(row[label_idx])
            values = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCell(
                        f"{path}:{line_no}: non-numeric cell {cell!r}"
                    ) from None
            rows.append(values)
    seen = {}
    y = np.array([seen.setdefault(lbl, len(seen)) for lbl in labels], dtype=np.int64)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return RawDataset(X, y, len(seen), feature_names)


class ThresholdBooleanizer:
    """One bit per feature: bit = (value > threshold)."""

    def __init__(self, threshold=75.0):
        self.threshold = threshold
        self._width = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        self.threshold = np.broadcast_to(
            np.asarray(self.threshold, dtype=np.float64), (X.shape[1],)
        ).copy()
        self._width = X.shape[1]
        return self

    @property
    def width(self):
        return self._width

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self._width is None:
            self.fit(X)
        if X.shape[1] != self._width:
            raise ValueError(f"expected {self._width} features, got {X.shape[1]}")
        return (X > self.threshold).astype(np.uint8)

    def feature_names(self, raw_names=None):
        names = raw_names or [f"f{i}" for i in range(self._width)]
        return [f"{name}>{theta:g}" for name, theta in zip(names, self.threshold)]


class ThermometerBooleanizer:
    """k bits per feature: bit_i = (value > edge_i) for increasing edges.

    Edges are equal-frequency quantiles of the fit data; duplicate quantiles
    (e.g. constant features) are dropped so edges stay strictly increasing,
    which keeps each feature's bit pattern of the form 1^m 0^(k-m).
    """

    def __init__(self, n_bins=5):
        if n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        self.n_bins = n_bins
        self.edges = None  # list of strictly increasing arrays, one per feature

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        qs = np.arange(1, self.n_bins + 1) / (self.n_bins + 1)
        self.edges = []
        for col in X.T:
            edges = np.unique(np.quantile(col, qs))
            self.edges.append(edges)
        return self

    @property
    def width(self):
        if self.edges is None:
            return None
        return int(sum(len(e) for e in self.edges))

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.edges is None:
            raise ValueError("thermometer booleanizer must be fitted first")
        if X.shape[1] != len(self.edges):
            raise ValueError(f"expected {len(self.edges)} features, got {X.shape[1]}")
        bits = [
            (X[:, [i]] > edges[None, :]) for i, edges in enumerate(self.edges)
        ]
        return np.hstack(bits).astype(np.uint8)

    def feature_names(self, raw_names=None):
        names = raw_names or [f"f{i}" for i in range(len(self.edges))]
        out = []
        for name, edges in zip(names, self.edges):
            out.extend(f"{name}>{edge:g}" for edge in edges)
        return out


def booleanize(booleanizer, raw: RawDataset) -> BoolDataset:
    """Apply a fitted booleanizer to a raw dataset."""
    bits = booleanizer.transform(raw.X)
    return BoolDataset(
        bits, raw.y, raw.n_classes, booleanizer.feature_names(raw.feature_names)
    )


def subsample(dataset, count, seed=0):
    """Seeded subsample without replacement (desk-scale experiment helper)."""
    if count >= len(dataset):
        return dataset
    idx = np.random.default_rng(seed).choice(len(dataset), size=count, replace=False)
    return dataset.subset(np.sort(idx))
