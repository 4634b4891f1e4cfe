"""Synthetic desk-scale datasets.

Seeded Gaussian blobs with unit within-class noise. Class labels are dealt
out evenly before shuffling so every class is represented at its expected
proportion regardless of n.
"""
from __future__ import annotations

import math

import numpy as np


def make_blobs(n, features=20, classes=2, separation=4.0, seed=0):
    """Gaussian class blobs: X of shape (n, features), integer labels y.

    Class means are random but scaled so the expected distance between any
    two of them is close to `separation`; with unit noise that makes the
    difficulty directly tunable.
    """
    if n < classes:
        raise ValueError(f"need at least one point per class, got n={n}")
    if classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((classes, features)) * (
        separation / math.sqrt(2.0 * features)
    )
    y = np.arange(n) % classes
    rng.shuffle(y)
    X = means[y] + rng.standard_normal((n, features))
    return X, y


def train_test_split(X, y, test_fraction=0.2, seed=0):
    """Seeded shuffle split into (X_train, y_train, X_test, y_test)."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = X.shape[0]
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise ValueError("split leaves no training data")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    return X[train], y[train], X[test], y[test]
