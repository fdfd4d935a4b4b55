"""Feature tables: the ``subject,category,<64 features>`` CSV and its
in-memory form."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from ..model import FEATURE_GROUPS, FEATURE_NAMES, N_FEATURES, Category, FeatureVector

FEATURE_CSV_HEADER = ("subject", "category") + FEATURE_NAMES


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray  # Category ordinals
    subjects: list[str]
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        n = len(self.subjects)
        if self.X.shape != (n, N_FEATURES) or self.y.shape != (n,):
            raise ValueError(f"inconsistent dataset shapes {self.X.shape}, {self.y.shape}, {n}")
        if not np.isfinite(self.X).all():
            raise ValueError("dataset has non-finite features")
        if self.weights is not None and len(self.weights) != n:
            raise ValueError("weights length mismatch")

    def __len__(self) -> int:
        return len(self.subjects)


def format_float(v: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(v) + 0.0)


def write_feature_csv(rows: Iterable[tuple[str, Category, FeatureVector]], stream: IO[str]) -> int:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(FEATURE_CSV_HEADER)
    n = 0
    for subject, category, fv in rows:
        w.writerow([subject, category.name, *(format_float(v) for v in fv.values)])
        n += 1
    return n


def read_feature_csv(stream: IO[str]) -> Dataset:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(header) != FEATURE_CSV_HEADER:
        raise ValueError("feature CSV header does not match the canonical 64-feature layout")
    subjects, ys, rows = [], [], []
    for row in reader:
        if not row:
            continue
        if len(row) != len(FEATURE_CSV_HEADER):
            raise ValueError(f"line {reader.line_num}: expected {len(FEATURE_CSV_HEADER)} columns")
        subjects.append(row[0])
        ys.append(int(Category.parse(row[1])))
        rows.append([float(v) for v in row[2:]])
    X = np.asarray(rows, dtype=float).reshape(len(rows), N_FEATURES)
    return Dataset(X, np.asarray(ys, dtype=int), subjects)


def mask_columns(groups: Iterable[str]) -> list[int]:
    """Canonical column indices for a set of feature groups
    (``basic``, ``extra``, ``moments``)."""
    groups = set(groups)
    unknown = groups - set(FEATURE_GROUPS)
    if unknown or not groups:
        raise ValueError(f"feature groups must be drawn from {sorted(FEATURE_GROUPS)}, got {sorted(groups)}")
    return [j for g in ("basic", "extra", "moments") if g in groups for j in FEATURE_GROUPS[g]]


def parse_mask(text: str) -> tuple[str, ...]:
    """``"all"`` or a ``+``/``,`` separated list such as ``basic+moments``."""
    text = text.strip().lower()
    if text == "all":
        return ("basic", "extra", "moments")
    parts = [p for p in text.replace(",", "+").split("+") if p]
    mask_columns(parts)
    return tuple(g for g in ("basic", "extra", "moments") if g in parts)
