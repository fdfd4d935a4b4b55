"""Training, prediction, importance and JSON persistence for the five
classifier kinds: ``logistic``, ``perceptron``, ``tree``, ``forest``,
``gbt``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..model import FEATURE_NAMES
from .linear import _softmax, fit_logistic, fit_perceptron
from .prep import MaxAbsScaler, derive_seed
from .trees import BinnedData, Tree, grow_classification_tree, grow_gradient_tree

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MODEL_KINDS = ("logistic", "perceptron", "tree", "forest", "gbt")
TREE_KINDS = ("tree", "forest", "gbt")
LINEAR_KINDS = ("logistic", "perceptron")
MODEL_FORMAT_VERSION = 1


class UnsupportedModel(TypeError):
    pass


def default_config() -> dict:
    text = resources.files("txhist.learn").joinpath("defaults.toml").read_text("utf-8")
    return tomllib.loads(text)


def resolve_config(kind: str, overrides: dict | None = None) -> dict:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    cfg = dict(default_config()[kind])
    for k, v in (overrides or {}).items():
        if k not in cfg:
            raise ValueError(f"unknown {kind} option {k!r}")
        cfg[k] = v
    return cfg


@dataclass
class Model:
    kind: str
    config: dict
    seed: int
    classes: tuple[int, ...]
    feature_names: tuple[str, ...]
    scaler: MaxAbsScaler | None = None
    params: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            got = X.shape[1] if X.ndim == 2 else X.shape
            raise ValueError(f"model expects {self.n_features} columns, got {got}")
        return X

    def scores(self, X) -> np.ndarray:
        """Per-class scores, columns in ``classes`` order."""
        X = self._check(X)
        if self.degenerate:
            return np.ones((len(X), 1))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        p = self.params
        if self.kind in LINEAR_KINDS:
            return X @ p["coef"] + p["intercept"]
        if self.kind == "tree":
            return p["trees"][0].predict(X)
        if self.kind == "forest":
            return sum(t.predict(X) for t in p["trees"]) / len(p["trees"])
        if self.kind == "gbt":
            out = np.tile(p["init"], (len(X), 1))
            for round_trees in p["trees"]:
                for k, t in enumerate(round_trees):
                    out[:, k] += t.predict(X)[:, 0]
            return out
        raise UnsupportedModel(self.kind)

    def predict(self, X) -> np.ndarray:
        """Category ordinals; ties go to the lowest ordinal."""
        s = self.scores(X)
        return np.asarray(self.classes)[np.argmax(s, axis=1)]

    # -- persistence

    def to_dict(self) -> dict:
        p = self.params
        if self.kind in LINEAR_KINDS:
            params = {"coef": p["coef"].tolist(), "intercept": p["intercept"].tolist()}
        elif self.kind in ("tree", "forest"):
            params = {"trees": [t.to_dict() for t in p.get("trees", [])]}
        else:
            params = {
                "init": p["init"].tolist() if "init" in p else [],
                "trees": [[t.to_dict() for t in r] for r in p.get("trees", [])],
            }
        if self.degenerate:
            params = {}
        return {
            "format": "txhist-model",
            "version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "seed": self.seed,
            "classes": list(self.classes),
            "feature_names": list(self.feature_names),
            "scaler": list(self.scaler.scale) if self.scaler is not None else None,
            "degenerate": self.degenerate,
            "params": params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != "txhist-model" or d.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("not a version-1 txhist model")
        kind = d["kind"]
        raw = d["params"]
        params: dict = {}
        if not d["degenerate"]:
            if kind in LINEAR_KINDS:
                params = {"coef": np.asarray(raw["coef"], dtype=float),
                          "intercept": np.asarray(raw["intercept"], dtype=float)}
            elif kind in ("tree", "forest"):
                params = {"trees": [Tree.from_dict(t) for t in raw["trees"]]}
            else:
                params = {"init": np.asarray(raw["init"], dtype=float),
                          "trees": [[Tree.from_dict(t) for t in r] for r in raw["trees"]]}
        scaler = MaxAbsScaler(tuple(d["scaler"])) if d["scaler"] is not None else None
        return cls(kind, d["config"], d["seed"], tuple(d["classes"]), tuple(d["feature_names"]),
                   scaler, params, d["degenerate"])


def _depth(v) -> int | None:
    return None if not v else int(v)


def train(
    kind: str,
    X,
    y,
    weights=None,
    *,
    config: dict | None = None,
    seed: int = 0,
    feature_names=None,
    threads: int = 1,
) -> Model:
    """Fit a classifier on feature matrix ``X`` and Category ordinals ``y``.

    ``weights`` default to uniform. Linear kinds are trained on max-abs
    scaled features; tree kinds on raw features.
    """
    cfg = resolve_config(kind, config)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise ValueError("need a non-empty matrix with one label per row")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix has non-finite entries")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(y) or not (w > 0).all():
        raise ValueError("weights must be positive, one per row")
    names = tuple(feature_names) if feature_names is not None else FEATURE_NAMES[: X.shape[1]]
    if len(names) != X.shape[1]:
        raise ValueError("feature_names length does not match the column count")
    classes = tuple(int(c) for c in np.unique(y))
    model = Model(kind, cfg, int(seed), classes, names)
    if len(classes) == 1:
        model.degenerate = True
        return model
    yk = np.searchsorted(np.asarray(classes), y)
    K = len(classes)

    if kind in LINEAR_KINDS:
        model.scaler = MaxAbsScaler.fit(X)
        Xs = model.scaler.transform(X)
        if kind == "logistic":
            coef, bias, _ = fit_logistic(Xs, yk, w, K, max_iter=int(cfg["max_iter"]),
                                         tol=float(cfg["tol"]), l2=float(cfg["l2"]))
        else:
            rng = np.random.default_rng(derive_seed(seed, "perceptron"))
            coef, bias = fit_perceptron(Xs, yk, w, K, epochs=int(cfg["epochs"]),
                                        learning_rate=float(cfg["learning_rate"]), rng=rng)
        model.params = {"coef": coef, "intercept": bias}
        return model

    data = BinnedData.from_matrix(X, int(cfg["max_bins"]))
    if kind == "tree":
        tree = grow_classification_tree(data, yk, w, K, max_depth=_depth(cfg["max_depth"]),
                                        min_samples_leaf=int(cfg["min_samples_leaf"]))
        model.params = {"trees": [tree]}
    elif kind == "forest":
        model.params = {"trees": _grow_forest(data, yk, w, K, cfg, seed, threads)}
    else:
        model.params = _fit_gbt(data, yk, w, K, cfg)
    return model


def _max_features(setting, n_features: int) -> int:
    if setting == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if setting in (None, 0, "all"):
        return n_features
    return max(1, min(int(setting), n_features))


def _grow_forest(data, y, w, K, cfg, seed, threads) -> list[Tree]:
    n = len(y)
    mtry = _max_features(cfg["max_features"], data.bins.shape[1])

    def one(t: int) -> Tree:
        rng = np.random.default_rng(derive_seed(seed, "tree", t))
        if cfg["bootstrap"]:
            counts = np.bincount(rng.integers(0, n, n), minlength=n)
            rows = np.flatnonzero(counts)
            wt = w * counts
        else:
            rows, wt = np.arange(n), w
        return grow_classification_tree(
            data, y, wt, K, rows=rows, max_depth=_depth(cfg["max_depth"]),
            min_samples_leaf=int(cfg["min_samples_leaf"]), max_features=mtry, rng=rng,
        )

    ids = range(int(cfg["n_trees"]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ids))
    return [one(t) for t in ids]


def _fit_gbt(data, y, w, K, cfg) -> dict:
    n = len(y)
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    prior = np.bincount(y, weights=w, minlength=K) / w.sum()
    init = np.log(prior)
    F = np.tile(init, (n, 1))
    rounds = []
    for _ in range(int(cfg["rounds"])):
        P = _softmax(F)
        trees = []
        for k in range(K):
            grad = w * (P[:, k] - Y[:, k])
            hess = np.maximum(w * P[:, k] * (1.0 - P[:, k]), 1e-16)
            tree, fitted = grow_gradient_tree(
                data, grad, hess, y, w, K,
                max_depth=int(cfg["max_depth"]),
                min_samples_leaf=int(cfg["min_samples_leaf"]),
                l2=float(cfg["l2"]),
                min_child_weight=float(cfg["min_child_weight"]),
                learning_rate=float(cfg["learning_rate"]),
            )
            F[:, k] += fitted
            trees.append(tree)
        rounds.append(trees)
    return {"init": init, "trees": rounds}


def feature_importance(model: Model) -> list[tuple[str, float]]:
    """Total information gain per feature, largest first (ties by column
    order). Forests average over trees; boosted models sum over trees."""
    if model.kind not in TREE_KINDS:
        raise UnsupportedModel(f"feature importance needs a tree model, got {model.kind!r}")
    total = np.zeros(model.n_features)
    if not model.degenerate:
        if model.kind in ("tree", "forest"):
            trees = model.params["trees"]
            for t in trees:
                total += t.importances(model.n_features)
            total /= len(trees)
        else:
            for r in model.params["trees"]:
                for t in r:
                    total += t.importances(model.n_features)
    order = sorted(range(model.n_features), key=lambda j: (-total[j], j))
    return [(model.feature_names[j], float(total[j])) for j in order]


