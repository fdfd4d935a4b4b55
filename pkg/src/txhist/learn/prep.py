"""Class weights, scaling, fold plans and seed derivation."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def sample_weights(labels, *, exact: bool = False):
    """Per-sample weights ``(1/C) / p_c`` with ``p_c`` the frequency of the
    sample's class and ``C`` the number of classes present.

    ``exact=True`` returns :class:`fractions.Fraction` values.
    """
    labels = list(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot weight an empty label vector")
    counts: dict = {}
    for y in labels:
        counts[y] = counts.get(y, 0) + 1
    c = len(counts)
    if exact:
        return [Fraction(n, c * counts[y]) for y in labels]
    return np.array([n / (c * counts[y]) for y in labels], dtype=float)


@dataclass(frozen=True)
class MaxAbsScaler:
    scale: tuple[float, ...]

    @classmethod
    def fit(cls, X) -> "MaxAbsScaler":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("need a non-empty 2-d training matrix")
        m = np.abs(X).max(axis=0)
        return cls(tuple(float(v) if v > 0 else 1.0 for v in m))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != len(self.scale):
            raise ValueError(f"expected {len(self.scale)} columns, got {X.shape[1]}")
        return X / np.asarray(self.scale)


def max_abs_normalize(X):
    """Fit on training rows; returns the scaler and its transform."""
    scaler = MaxAbsScaler.fit(X)
    return scaler, scaler.transform


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[int, ...], ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.asarray(self.folds[fold], dtype=int)
        train = np.asarray(
            sorted(i for f, idx in enumerate(self.folds) if f != fold for i in idx), dtype=int
        )
        return train, test


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Shuffle each class with the seed and deal it round-robin over the
    folds. The dealing position carries over between classes so fold sizes
    also differ by at most one."""
    labels = list(labels)
    n = len(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples ({n})")
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    by_class: dict = {}
    for i, y in enumerate(labels):
        by_class.setdefault(y, []).append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for y in sorted(by_class):
        idx = np.asarray(by_class[y])
        for i in idx[rng.permutation(len(idx))]:
            folds[pos % k].append(int(i))
            pos += 1
    return FoldPlan(tuple(tuple(sorted(f)) for f in folds), seed)


def derive_seed(root: int, *path) -> int:
    """Stable child seed for ``(root, *path)``; path items are ints or strings."""
    key = [int(root) & 0xFFFFFFFF]
    for p in path:
        if isinstance(p, str):
            key.extend(p.encode("utf-8"))
        else:
            key.append(int(p))
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0] >> 1)
