"""Labeled datasets: CIFAR-10 binary loader and a synthetic blob generator."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import CorruptRecordError, InvalidParameterError, MalformedFileError

CIFAR_RECORD_BYTES = 3073
CIFAR_PIXELS = 3072
CIFAR_CLASSES = 10


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix in [0, 1] plus integer labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise InvalidParameterError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise InvalidParameterError(
                f"features has {self.features.shape[0]} rows but labels has {self.labels.shape[0]} entries"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise InvalidParameterError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)


def load_cifar10_binary(file_paths) -> LabeledDataset:
    """Concatenate CIFAR-10 binary batches in argument order.

    Each record is one label byte followed by 3072 channel-major pixel bytes.
    Pixels are scaled by 1/255.
    """
    chunks = []
    for path in file_paths:
        raw = np.fromfile(os.fspath(path), dtype=np.uint8)
        if raw.size % CIFAR_RECORD_BYTES != 0:
            raise MalformedFileError(
                f"{path}: size {raw.size} is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        chunks.append(raw.reshape(-1, CIFAR_RECORD_BYTES))
    records = np.concatenate(chunks) if chunks else np.empty((0, CIFAR_RECORD_BYTES), np.uint8)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > CIFAR_CLASSES - 1)
    if bad.size:
        i = int(bad[0])
        raise CorruptRecordError(f"record {i} has label byte {labels[i]} > 9", i)
    features = records[:, 1:].astype(np.float64) / 255.0
    return LabeledDataset(features, labels, CIFAR_CLASSES)


def blob_centers(num_classes: int, dim: int) -> np.ndarray:
    # One-hot-plus-offset rows; classes beyond dim reuse a coordinate at a shifted base level.
    centers = np.empty((num_classes, dim))
    levels = -(-num_classes // dim)
    for c in range(num_classes):
        level = c // dim
        base = 0.3 if levels == 1 else 0.2 + 0.2 * level / (levels - 1)
        centers[c] = base
        centers[c, c % dim] = base + 0.4
    return centers


def make_synthetic_blobs(n_per_class, num_classes, dim, spread, seed) -> LabeledDataset:
    """Gaussian blobs around fixed per-class centers, clamped to [0, 1].

    Rows are ordered class by class, so class counts are exactly balanced.
    """
    if n_per_class < 1 or num_classes < 2 or dim < 2:
        raise InvalidParameterError("need n_per_class >= 1, num_classes >= 2, dim >= 2")
    if not spread >= 0:
        raise InvalidParameterError(f"spread must be >= 0, got {spread}")
    rng = np.random.default_rng(seed)
    centers = blob_centers(num_classes, dim)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), n_per_class)
    noise = rng.standard_normal((labels.size, dim)) * spread
    features = np.clip(centers[labels] + noise, 0.0, 1.0)
    return LabeledDataset(features, labels, num_classes)


def class_counts(ds: LabeledDataset, index_set=None) -> np.ndarray:
    """Samples per class over ``index_set`` (all samples when omitted)."""
    if index_set is None:
        labels = ds.labels
    else:
        idx = np.asarray(index_set, dtype=np.int64).reshape(-1)
        if idx.size:
            out = idx[(idx < 0) | (idx >= len(ds))]
            if out.size:
                raise IndexError(f"sample index {int(out[0])} out of range [0, {len(ds)})")
        labels = ds.labels[idx]
    return np.bincount(labels, minlength=ds.num_classes).astype(np.int64)
