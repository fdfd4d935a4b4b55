"""Stratified k-fold evaluation and the report it produces."""

from __future__ import annotations

import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..model import FEATURE_NAMES, N_CATEGORIES
from .data import Dataset, mask_columns
from .metrics import CATEGORY_NAMES, class_scores, evaluate, macro_f1, micro_f1, row_normalize
from .models import TREE_KINDS, feature_importance, resolve_config, train
from .prep import derive_seed, sample_weights, stratified_kfold

REPORT_FORMAT_VERSION = 1


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class EvaluationReport:
    fold_micro_f1: list[float]
    fold_macro_f1: list[float]
    confusion: np.ndarray
    importances: list[tuple[str, float]] | None
    metadata: dict = field(default_factory=dict)
    degenerate_folds: list[int] = field(default_factory=list)

    @property
    def micro_f1(self) -> float:
        return float(np.mean(self.fold_micro_f1))

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.fold_macro_f1))

    @property
    def confusion_normalized(self) -> np.ndarray:
        return row_normalize(self.confusion)

    def to_dict(self) -> dict:
        per_class = {
            CATEGORY_NAMES[c]: {"precision": s.precision, "recall": s.recall, "f1": s.f1,
                                "support": s.support}
            for c, s in enumerate(class_scores(self.confusion))
        }
        return {
            "format": "txhist-report",
            "version": REPORT_FORMAT_VERSION,
            "metadata": self.metadata,
            "folds": [
                {"fold": i, "micro_f1": mi, "macro_f1": ma}
                for i, (mi, ma) in enumerate(zip(self.fold_micro_f1, self.fold_macro_f1))
            ],
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "pooled_micro_f1": micro_f1(self.confusion),
            "pooled_macro_f1": macro_f1(self.confusion),
            "categories": list(CATEGORY_NAMES),
            "confusion": self.confusion.astype(int).tolist(),
            "confusion_normalized": self.confusion_normalized.tolist(),
            "per_class": per_class,
            "importances": None if self.importances is None
            else [{"feature": n, "score": s} for n, s in self.importances],
            "degenerate_folds": self.degenerate_folds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def confusion_csv(self, normalized: bool = False) -> str:
        m = self.confusion_normalized if normalized else self.confusion
        buf = io.StringIO()
        buf.write("true\\predicted," + ",".join(CATEGORY_NAMES) + "\n")
        for c, row in enumerate(m):
            cells = [repr(float(v)) if normalized else str(int(v)) for v in row]
            buf.write(CATEGORY_NAMES[c] + "," + ",".join(cells) + "\n")
        return buf.getvalue()

    def importance_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rank,feature,score\n")
        for r, (name, score) in enumerate(self.importances or [], start=1):
            buf.write(f"{r},{name},{score!r}\n")
        return buf.getvalue()


def cross_validate(
    dataset: Dataset,
    kind: str,
    config: dict | None = None,
    k: int = 10,
    seed: int = 0,
    *,
    features=("basic", "extra", "moments"),
    weighted: bool = True,
    threads: int = 1,
) -> EvaluationReport:
    """Train one model per fold, predict the held-out fold, and aggregate.

    Fold metrics are averaged, confusion matrices summed, and importances
    (tree kinds only) averaged over folds. Per-fold sample weights are
    computed from the training part of each fold.
    """
    cfg = resolve_config(kind, config)
    cols = mask_columns(features)
    names = tuple(FEATURE_NAMES[j] for j in cols)
    X = dataset.X[:, cols]
    y = dataset.y
    plan = stratified_kfold(y.tolist(), k, seed)

    def run_fold(f: int):
        train_idx, test_idx = plan.split(f)
        w = sample_weights(y[train_idx].tolist()) if weighted else None
        model = train(kind, X[train_idx], y[train_idx], w, config=cfg,
                      seed=derive_seed(seed, "fold", f), feature_names=names)
        pred = model.predict(X[test_idx])
        ev = evaluate(pred.tolist(), y[test_idx].tolist())
        imp = feature_importance(model) if kind in TREE_KINDS else None
        return ev, imp, model.degenerate

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(plan.k)))
    else:
        results = [run_fold(f) for f in range(plan.k)]

    confusion = np.zeros((N_CATEGORIES, N_CATEGORIES), dtype=int)
    for ev, _, _ in results:
        confusion += ev.confusion
    importances = None
    if kind in TREE_KINDS:
        acc = {n: 0.0 for n in names}
        for _, imp, _ in results:
            for n, s in imp:
                acc[n] += s
        order = sorted(range(len(names)), key=lambda j: (-acc[names[j]], j))
        importances = [(names[j], acc[names[j]] / plan.k) for j in order]
    run_config = {
        "model": kind,
        "model_config": cfg,
        "k": k,
        "seed": seed,
        "features": list(features),
        "weighted": weighted,
    }
    metadata = {"config": run_config, "config_hash": config_hash(run_config), "seed": seed,
                "n_samples": len(dataset), "n_features": len(cols)}
    return EvaluationReport(
        fold_micro_f1=[ev.micro_f1 for ev, _, _ in results],
        fold_macro_f1=[ev.macro_f1 for ev, _, _ in results],
        confusion=confusion,
        importances=importances,
        metadata=metadata,
        degenerate_folds=[f for f, (_, _, d) in enumerate(results) if d],
    )
