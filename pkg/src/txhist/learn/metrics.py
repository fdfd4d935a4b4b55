"""Multiclass F1 scores and confusion matrices over the seven categories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import N_CATEGORIES, Category


def confusion_matrix(truths, predictions, n_classes: int = N_CATEGORIES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    t = np.asarray(truths, dtype=int)
    p = np.asarray(predictions, dtype=int)
    return np.bincount(t * n_classes + p, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )


def row_normalize(cm: np.ndarray) -> np.ndarray:
    """Rows divided by their sums; rows of absent classes stay zero."""
    cm = np.asarray(cm, dtype=float)
    sums = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, sums, out=np.zeros_like(cm), where=sums > 0)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


def class_scores(cm: np.ndarray) -> list[ClassScores]:
    out = []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        pred = int(cm[:, c].sum())
        true = int(cm[c, :].sum())
        prec = tp / pred if pred else 0.0
        rec = tp / true if true else 0.0
        f1 = 2 * tp / (pred + true) if pred + true else 0.0
        out.append(ClassScores(prec, rec, f1, true))
    return out


def micro_f1(cm: np.ndarray) -> float:
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


def macro_f1(cm: np.ndarray) -> float:
    """Mean F1 over classes that occur in the truth or in the predictions.
    A class that is predicted but never true scores 0."""
    present = (cm.sum(axis=0) + cm.sum(axis=1)) > 0
    if not present.any():
        return 0.0
    scores = class_scores(cm)
    return float(np.mean([scores[c].f1 for c in np.flatnonzero(present)]))


@dataclass(frozen=True)
class Evaluation:
    micro_f1: float
    macro_f1: float
    confusion: np.ndarray
    confusion_normalized: np.ndarray
    per_class: tuple[ClassScores, ...]


def evaluate(predictions, truths) -> Evaluation:
    predictions = list(predictions)
    truths = list(truths)
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not truths:
        raise ValueError("nothing to evaluate")
    cm = confusion_matrix([int(t) for t in truths], [int(p) for p in predictions])
    return Evaluation(micro_f1(cm), macro_f1(cm), cm, row_normalize(cm), tuple(class_scores(cm)))


CATEGORY_NAMES = tuple(c.name for c in Category)
