"""Histogram-based decision trees, random forests and gradient boosting.

Features are discretized once per training set into at most ``max_bins``
ordered bins with cut points halfway between adjacent distinct values, so
splits only depend on the order of values (any per-column positive
rescaling yields the same trees, with scaled thresholds). A row goes left
when ``x <= threshold``.

Every split node records its information gain as
``(W_node H(node) - W_left H(left) - W_right H(right)) / W_root`` where ``W``
are sample-weight totals and ``H`` the entropy (nats) of the weighted class
distribution; boosted trees record the same quantity for the labels of the
rows they split, even though their split choice follows the boosting loss.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

# -- binning -------------------------------------------------------------------


def fit_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    edges = []
    for col in X.T:
        u = np.unique(col)
        if len(u) > max_bins:
            cuts = np.unique(np.round(np.arange(1, max_bins) * len(u) / max_bins).astype(int))
            lo, hi = u[cuts - 1], u[cuts]
        else:
            lo, hi = u[:-1], u[1:]
        mid = lo + (hi - lo) / 2
        edges.append(np.where(mid < hi, mid, lo))
    return edges


def apply_edges(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.int32)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, X[:, j], side="left")
    return out


def _xlogx(a: np.ndarray) -> np.ndarray:
    return a * np.log(np.maximum(a, 1e-300))


def _wh(counts: np.ndarray) -> np.ndarray:
    """``W * H`` along the last axis: total weight times entropy."""
    return _xlogx(counts.sum(axis=-1)) - _xlogx(counts).sum(axis=-1)


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy along the last axis of non-negative weights."""
    tot = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / tot[..., None]
        logs = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        h = -(p * logs).sum(axis=-1)
    return np.where(tot > 0, h, 0.0)


# -- tree structure ------------------------------------------------------------


@dataclass
class Tree:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)
    gain: np.ndarray  # information gain of the split, 0 at leaves

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            f = self.feature[nd]
            go_left = X[active, f] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def importances(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features)
        split = self.feature >= 0
        np.add.at(out, self.feature[split], self.gain[split])
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float).reshape(len(d["feature"]), -1),
            np.asarray(d["gain"], dtype=float),
        )


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.gain = [], []

    def node(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def split(self, nid, feature, threshold, left, right, gain) -> None:
        self.feature[nid] = feature
        self.threshold[nid] = threshold
        self.left[nid] = left
        self.right[nid] = right
        self.gain[nid] = gain

    def build(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=float),
            np.asarray(self.gain, dtype=float),
        )


@dataclass
class BinnedData:
    bins: np.ndarray  # (n, F) int32
    edges: list[np.ndarray]
    n_bins: int

    @functools.cached_property
    def offsets(self) -> np.ndarray:
        """Bins shifted so each column owns a disjoint index range."""
        return self.bins + (np.arange(self.bins.shape[1]) * self.n_bins)[None, :]

    @classmethod
    def from_matrix(cls, X: np.ndarray, max_bins: int) -> "BinnedData":
        edges = fit_edges(X, max_bins)
        bins = apply_edges(X, edges)
        return cls(bins, edges, max(len(e) for e in edges) + 1 if edges else 1)


def _split_gain_info(y_node, w_node, go_left, n_classes, w_root):
    cw = np.bincount(y_node, weights=w_node, minlength=n_classes)
    cl = np.bincount(y_node[go_left], weights=w_node[go_left], minlength=n_classes)
    cr = cw - cl
    return float(
        (cw.sum() * _entropy(cw) - cl.sum() * _entropy(cl) - cr.sum() * _entropy(cr)) / w_root
    )


def grow_classification_tree(
    data: BinnedData,
    y: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    *,
    rows: np.ndarray | None = None,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy tree maximizing weighted entropy reduction; leaves hold the
    normalized weighted class distribution."""
    n_feat = data.bins.shape[1]
    B = data.n_bins
    rows = np.arange(len(y)) if rows is None else rows
    w_root = float(w[rows].sum())
    b = _Builder()
    root = b.node(np.zeros(n_classes))
    stack = [(root, rows, 0)]
    while stack:
        nid, idx, depth = stack.pop()
        yi, wi = y[idx], w[idx]
        cw = np.bincount(yi, weights=wi, minlength=n_classes)
        b.value[nid] = cw / cw.sum()
        if (
            np.count_nonzero(cw) <= 1
            or len(idx) < 2 * min_samples_leaf
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        if max_features is not None and max_features < n_feat:
            feats = np.sort(rng.choice(n_feat, size=max_features, replace=False))
        else:
            feats = np.arange(n_feat)
        nf = len(feats)
        local = data.bins[idx][:, feats] + (np.arange(nf) * B)[None, :]
        flat = (local * n_classes + yi[:, None]).ravel()
        hist = np.bincount(flat, weights=np.repeat(wi, nf), minlength=nf * B * n_classes)
        hist = hist.reshape(nf, B, n_classes)
        cnt = np.bincount(local.ravel(), minlength=nf * B).reshape(nf, B)
        nl = np.cumsum(cnt, axis=1)
        nr = len(idx) - nl
        # a split after an empty bin repeats the previous candidate
        cand = (cnt > 0) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
        fi, bi = np.nonzero(cand)
        if fi.size == 0:
            continue
        left = np.cumsum(hist, axis=1)[fi, bi]
        right = np.maximum(cw[None, :] - left, 0.0)
        child = _wh(left) + _wh(right)
        best_c = int(np.argmin(child))
        best = int(fi[best_c]) * B + int(bi[best_c])
        fj, bin_ = divmod(best, B)
        f = int(feats[fj])
        go_left = data.bins[idx, f] <= bin_
        info = _split_gain_info(yi, wi, go_left, n_classes, w_root)
        lid = b.node(np.zeros(n_classes))
        rid = b.node(np.zeros(n_classes))
        b.split(nid, f, float(data.edges[f][bin_]), lid, rid, max(info, 0.0))
        stack.append((rid, idx[~go_left], depth + 1))
        stack.append((lid, idx[go_left], depth + 1))
    return b.build()


def grow_gradient_tree(
    data: BinnedData,
    grad: np.ndarray,
    hess: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    *,
    max_depth: int,
    min_samples_leaf: int,
    l2: float,
    min_child_weight: float,
    learning_rate: float,
) -> tuple[Tree, np.ndarray]:
    """Second-order regression tree on (grad, hess); returns the tree and the
    leaf value of every training row."""
    n, n_feat = data.bins.shape
    B = data.n_bins
    offsets = data.offsets
    w_root = float(w.sum())
    b = _Builder()
    fitted = np.empty(n)

    def leaf_value(G, H):
        return -G / (H + l2) * learning_rate

    root_idx = np.arange(n)
    root = b.node([leaf_value(grad.sum(), hess.sum())])
    stack = [(root, root_idx, 0)]
    while stack:
        nid, idx, depth = stack.pop()
        G, H = grad[idx].sum(), hess[idx].sum()
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf:
            fitted[idx] = b.value[nid][0]
            continue
        flat = offsets[idx].ravel()
        ch = np.bincount(flat, minlength=n_feat * B).reshape(n_feat, B)
        NL = np.cumsum(ch, axis=1)
        NR = len(idx) - NL
        cand = (ch > 0) & (NL >= min_samples_leaf) & (NR >= min_samples_leaf)
        fi, bi = np.nonzero(cand)
        if fi.size == 0:
            fitted[idx] = b.value[nid][0]
            continue
        gh = np.bincount(flat, weights=np.repeat(grad[idx], n_feat), minlength=n_feat * B)
        hh = np.bincount(flat, weights=np.repeat(hess[idx], n_feat), minlength=n_feat * B)
        GL = np.cumsum(gh.reshape(n_feat, B), axis=1)[fi, bi]
        HL = np.cumsum(hh.reshape(n_feat, B), axis=1)[fi, bi]
        GR, HR = G - GL, H - HL
        gain = GL**2 / (HL + l2) + GR**2 / (HR + l2) - G**2 / (H + l2)
        gain = np.where((HL >= min_child_weight) & (HR >= min_child_weight), gain, -np.inf)
        best_c = int(np.argmax(gain))
        if not gain[best_c] > 1e-12:
            fitted[idx] = b.value[nid][0]
            continue
        best = int(fi[best_c]) * B + int(bi[best_c])
        f, bin_ = divmod(best, B)
        go_left = data.bins[idx, f] <= bin_
        info = _split_gain_info(y[idx], w[idx], go_left, n_classes, w_root)
        li, ri = idx[go_left], idx[~go_left]
        lid = b.node([leaf_value(GL[best_c], HL[best_c])])
        rid = b.node([leaf_value(GR[best_c], HR[best_c])])
        b.split(nid, int(f), float(data.edges[f][bin_]), lid, rid, max(info, 0.0))
        stack.append((rid, ri, depth + 1))
        stack.append((lid, li, depth + 1))
    return b.build(), fitted
