"""CART regression trees and the two ensemble kinds (bagged forest, least-squares boosting)."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

MIN_TRAIN_ROWS = 20


class DegenerateTarget(UserWarning):
    """Target has zero variance; the model collapses to a single leaf."""


class TooFewRows(ValueError):
    pass


@dataclass(eq=False)
class Tree:
    """Flat array tree.  Leaves have feature == -1."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @classmethod
    def leaf(cls, value: float, cover: float) -> "Tree":
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                   np.array([float(value)]), np.array([float(cover)]))

    def __len__(self):
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self), dtype=int)
        for n in range(len(self)):
            if self.feature[n] >= 0:
                depth[self.left[n]] = depth[self.right[n]] = depth[n] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def expected_value(self) -> float:
        leaves = self.feature < 0
        return float(np.sum(self.value[leaves] * self.cover[leaves]) / self.cover[0])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value", "cover")}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(np.array(d["feature"], dtype=int), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=int), np.array(d["right"], dtype=int),
                   np.array(d["value"], dtype=float), np.array(d["cover"], dtype=float))


def _best_split(X, y, features, min_leaf):
    """Exact scan over sorted values of every candidate feature at once.

    Returns (gain, feature, threshold) or None.  Equal gains resolve to the
    lower threshold, then the lower feature index.
    """
    n = len(y)
    feats = np.asarray(list(features), dtype=int)
    total = y.sum()
    parent = total * total / n
    Xf = X[:, feats]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    csum = np.cumsum(y[order], axis=0)[:-1]
    nl = np.arange(1, n)[:, None]
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(valid, csum ** 2 / nl + (total - csum) ** 2 / (n - nl), -np.inf)
    gain = score - parent
    best_gain = gain.max()
    if not best_gain > 1e-12 * max(1.0, abs(parent)):
        return None
    rows, cols = np.nonzero(gain == best_gain)
    thr = 0.5 * (xs[rows, cols] + xs[rows + 1, cols])
    thr = np.where(thr >= xs[rows + 1, cols], xs[rows, cols], thr)
    k = min(range(len(rows)), key=lambda i: (thr[i], feats[cols[i]]))
    return float(best_gain), int(feats[cols[k]]), float(thr[k])


def build_tree(X, y, max_depth: int | None = None, min_samples_leaf: int = 1,
               max_features: float = 1.0, rng: np.random.Generator | None = None) -> Tree:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    nfeat = X.shape[1]
    k = max(1, int(math.ceil(max_features * nfeat))) if max_features < 1.0 else nfeat
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1); threshold.append(0.0); left.append(-1); right.append(-1)
        value.append(float(y[idx].mean())); cover.append(float(len(idx)))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2 * min_samples_leaf:
            continue
        if k < nfeat:
            feats = np.sort(rng.choice(nfeat, size=k, replace=False))
        else:
            feats = range(nfeat)
        split = _best_split(X[idx], y[idx], feats, min_samples_leaf)
        if split is None:
            continue
        _, f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = int(f), float(thr)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature, dtype=int), np.array(threshold), np.array(left, dtype=int),
                np.array(right, dtype=int), np.array(value), np.array(cover))


@dataclass(eq=False)
class TreeEnsemble:
    """prediction = base + scale * sum(tree outputs)."""
    kind: str                      # "forest" | "boosted"
    trees: list
    base: float
    scale: float
    feature_names: tuple = ()
    params: dict = field(default_factory=dict)
    degenerate: bool = False
    train_loss: list = field(default_factory=list)

    @property
    def learning_rate(self) -> float:
        return self.scale if self.kind == "boosted" else 1.0

    @property
    def expected_value(self) -> float:
        """Baseline of the attribution: mean prediction under the training covers."""
        return self.base + self.scale * sum(t.expected_value() for t in self.trees)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base)
        for t in self.trees:
            out += self.scale * t.predict(X)
        return out

    def to_dict(self) -> dict:
        return {"format": "mofscreen-tree-ensemble/1", "kind": self.kind, "base": self.base,
                "scale": self.scale, "feature_names": list(self.feature_names),
                "params": self.params, "degenerate": self.degenerate,
                "trees": [t.to_dict() for t in self.trees]}

    def to_json(self, indent=1) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "TreeEnsemble":
        return cls(d["kind"], [Tree.from_dict(t) for t in d["trees"]], float(d["base"]),
                   float(d["scale"]), tuple(d["feature_names"]), dict(d.get("params", {})),
                   bool(d.get("degenerate", False)))

    @classmethod
    def from_json(cls, text) -> "TreeEnsemble":
        return cls.from_dict(json.loads(text))


def _check(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per target value")
    if len(y) < MIN_TRAIN_ROWS:
        raise TooFewRows(f"need at least {MIN_TRAIN_ROWS} training rows, got {len(y)}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in training data")
    return X, y


def _degenerate(kind, y, names, params):
    warnings.warn("target has zero variance", DegenerateTarget, stacklevel=3)
    return TreeEnsemble(kind, [Tree.leaf(y[0], len(y))], 0.0, 1.0, tuple(names), params, degenerate=True)


def train_random_forest(X, y, n_trees: int = 200, max_depth: int | None = 12, min_samples_leaf: int = 1,
                        feature_subsample: float = 0.5, seed: int = 0, feature_names=()) -> TreeEnsemble:
    """Bagged CART trees; the mean of tree outputs is the prediction.

    Rows are used in the order given; callers wanting row-order invariance
    should canonicalise (``Dataset`` does this by id).
    """
    X, y = _check(X, y)
    params = dict(n_trees=n_trees, max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                  feature_subsample=feature_subsample, seed=seed)
    if np.ptp(y) == 0:
        return _degenerate("forest", y, feature_names, params)
    trees = []
    for ss in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.Generator(np.random.PCG64(ss))
        boot = np.sort(rng.integers(0, len(y), size=len(y)))
        trees.append(build_tree(X[boot], y[boot], max_depth, min_samples_leaf, feature_subsample, rng))
    return TreeEnsemble("forest", trees, 0.0, 1.0 / n_trees, tuple(feature_names), params)


def train_gbdt(X, y, n_rounds: int = 300, learning_rate: float = 0.05, max_depth: int = 4,
               min_child_weight: int = 1, subsample: float = 1.0, seed: int = 0,
               feature_names=()) -> TreeEnsemble:
    """Least-squares gradient boosting: F0 = mean(y), F_m = F_{m-1} + lr * tree_m(residuals)."""
    X, y = _check(X, y)
    params = dict(n_rounds=n_rounds, learning_rate=learning_rate, max_depth=max_depth,
                  min_child_weight=min_child_weight, subsample=subsample, seed=seed)
    if np.ptp(y) == 0:
        return _degenerate("boosted", y, feature_names, params)
    rng = np.random.Generator(np.random.PCG64(seed))
    base = float(y.mean())
    F = np.full(len(y), base)
    trees, loss = [], [float(np.mean((y - F) ** 2))]
    for _ in range(n_rounds):
        rows = np.arange(len(y))
        if subsample < 1.0:
            rows = np.sort(rng.choice(len(y), size=max(2, int(subsample * len(y))), replace=False))
        t = build_tree(X[rows], (y - F)[rows], max_depth, min_child_weight)
        F = F + learning_rate * t.predict(X)
        trees.append(t)
        loss.append(float(np.mean((y - F) ** 2)))
    return TreeEnsemble("boosted", trees, base, learning_rate, tuple(feature_names), params, train_loss=loss)
