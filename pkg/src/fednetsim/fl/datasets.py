"""Synthetic classification datasets (Gaussian blobs)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgs


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int class ids in [0, n_classes)
    n_classes: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise InvalidArgs("features and labels must have equal length")
        present = np.unique(self.labels)
        if len(present) != self.n_classes or present[0] != 0 or present[-1] != self.n_classes - 1:
            raise InvalidArgs("every class label in [0, n_classes) must appear at least once")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_synthetic_dataset(seed: int, n: int, n_classes: int, dim: int, class_sep: float) -> Dataset:
    """Gaussian blobs: class means on a sphere of radius class_sep, unit covariance.

    Means sit evenly spaced on a randomly rotated great circle, so any two
    classes stay separated by at least 2*class_sep*sin(pi/n_classes) for every
    seed (independent directions can land nearly parallel). Labels cycle
    0..n_classes-1, so counts are balanced (differ by at most 1) and any
    contiguous slice stays near-balanced. Deterministic in seed.
    """
    if n_classes < 2:
        raise InvalidArgs(f"need at least 2 classes, got {n_classes}")
    if n < n_classes:
        raise InvalidArgs(f"need n >= n_classes, got n={n}, n_classes={n_classes}")
    if dim < 2:
        raise InvalidArgs(f"need dim >= 2, got {dim}")
    if class_sep < 0:
        raise InvalidArgs(f"class_sep must be >= 0, got {class_sep}")

    rng = np.random.default_rng(seed)
    # random orthonormal 2-D plane (Gram-Schmidt), O(dim) instead of a full
    # dim x dim rotation
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    v = rng.normal(size=dim)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    means = class_sep * (np.outer(np.cos(angles), u) + np.outer(np.sin(angles), v))

    labels = np.arange(n) % n_classes
    features = means[labels] + rng.normal(size=(n, dim))
    return Dataset(features, labels, n_classes)


def train_eval_split(dataset: Dataset, eval_fraction: float) -> tuple[Dataset, Dataset]:
    """Split off the trailing eval_fraction of samples as a held-out set."""
    if not 0.0 < eval_fraction < 1.0:
        raise InvalidArgs(f"eval_fraction must be in (0, 1), got {eval_fraction}")
    n_eval = int(round(len(dataset) * eval_fraction))
    n_train = len(dataset) - n_eval
    if n_train < dataset.n_classes or n_eval < dataset.n_classes:
        raise InvalidArgs("split leaves a side without every class")
    train = Dataset(dataset.features[:n_train], dataset.labels[:n_train], dataset.n_classes)
    held_out = Dataset(dataset.features[n_train:], dataset.labels[n_train:], dataset.n_classes)
    return train, held_out
