"""Datasets keyed by row id, splits, cross-validated grid tuning, SHAP rankings and a synthetic generator."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .metrics import metrics
from .shap import tree_shap
from .trees import TreeEnsemble, train_gbdt, train_random_forest

TRAINERS = {"forest": train_random_forest, "boosted": train_gbdt}

DEFAULT_GRIDS = {
    "forest": {"n_trees": [100], "max_depth": [8, 12], "min_samples_leaf": [1, 3], "feature_subsample": [0.5, 1.0]},
    "boosted": {"n_rounds": [200, 400], "learning_rate": [0.05], "max_depth": [3, 5], "min_child_weight": [1, 3]},
}


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    names: tuple
    ids: tuple

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.names = tuple(self.names)
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names")
        if self.ids is None or len(self.ids) == 0:
            self.ids = tuple(f"{i:08d}" for i in range(len(self.y)))
        self.ids = tuple(str(i) for i in self.ids)
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate row ids")
        if self.X.shape != (len(self.y), len(self.names)):
            raise ValueError("shape mismatch between X, y and names")

    def __len__(self):
        return len(self.y)

    def canonical(self) -> "Dataset":
        order = sorted(range(len(self)), key=lambda i: self.ids[i])
        return self.take(order)

    def take(self, rows) -> "Dataset":
        rows = list(rows)
        return Dataset(self.X[rows], self.y[rows], self.names, tuple(self.ids[i] for i in rows))

    def columns(self, names) -> "Dataset":
        idx = [self.names.index(n) for n in names]
        return Dataset(self.X[:, idx], self.y, tuple(names), self.ids)

    def split(self, test_fraction: float = 0.2, seed: int = 0) -> tuple["Dataset", "Dataset"]:
        """Random split over id-sorted rows, so row order of the input does not matter."""
        c = self.canonical()
        perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(c))
        ntest = int(round(test_fraction * len(c)))
        return c.take(np.sort(perm[ntest:])), c.take(np.sort(perm[:ntest]))

    def folds(self, k: int = 5, seed: int = 0):
        c = self.canonical()
        perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(c))
        for part in np.array_split(perm, k):
            mask = np.zeros(len(c), dtype=bool)
            mask[part] = True
            yield c.take(np.flatnonzero(~mask)), c.take(np.flatnonzero(mask))


def train(kind: str, d: Dataset, seed: int = 0, **params) -> TreeEnsemble:
    c = d.canonical()
    return TRAINERS[kind](c.X, c.y, seed=seed, feature_names=c.names, **params)


def cross_validate(kind: str, d: Dataset, params: dict, k: int = 5, seed: int = 0) -> list[float]:
    scores = []
    for tr, va in d.folds(k, seed):
        model = train(kind, tr, seed=seed, **params)
        scores.append(metrics(va.y, model.predict(va.X)).r2)
    return scores


def tune(kind: str, d: Dataset, grid: dict | None = None, k: int = 5, seed: int = 0):
    """Exhaustive grid search by mean k-fold R^2; returns (best params, best scores, all results)."""
    grid = grid if grid is not None else DEFAULT_GRIDS[kind]
    keys = sorted(grid)
    results = []
    for combo in product(*(grid[key] for key in keys)):
        params = dict(zip(keys, combo))
        scores = cross_validate(kind, d, params, k, seed)
        results.append((params, scores))
    best = max(results, key=lambda r: np.nan_to_num(np.mean(r[1]), nan=-np.inf))
    return best[0], best[1], results


@dataclass
class ImportanceRow:
    feature: str
    mean_abs_shap: float
    mean_shap: float
    sign: float          # Pearson(feature value, SHAP value); 0 when undefined


def feature_importance_report(e: TreeEnsemble, X, names=None):
    """Features sorted by mean |SHAP| (ties by name).  Returns (rows, shap matrix)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    names = list(names if names is not None else e.feature_names)
    phi = tree_shap(e, X)
    rows = []
    for j, name in enumerate(names):
        x, p = X[:, j], phi[:, j]
        if x.std() > 0 and p.std() > 0:
            r = float(np.corrcoef(x, p)[0, 1])
        else:
            r = 0.0
        rows.append(ImportanceRow(name, float(np.abs(p).mean()), float(p.mean()), r))
    rows.sort(key=lambda r: (-r.mean_abs_shap, r.feature))
    return rows, phi


def three_block_dataset(n: int = 500, seed: int = 0, sizes=(3, 3, 3), noise: float = 0.1) -> tuple[Dataset, list]:
    """Synthetic table whose signal is spread over three feature blocks of comparable variance.

    Returns the dataset and the list of column-name blocks.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    X = rng.normal(size=(n, sum(sizes)))
    b1, b2, b3 = np.split(np.arange(sum(sizes)), np.cumsum(sizes)[:-1])
    y = (X[:, b1[0]] + 0.5 * X[:, b1[-1]] ** 2
         + np.sin(1.5 * X[:, b2[0]]) + 0.7 * X[:, b2[-1]]
         + X[:, b3[0]] * X[:, b3[-1]] / np.sqrt(2) + 0.5 * X[:, b3[len(b3) // 2]])
    y = y + noise * rng.normal(size=n)
    names = [f"s{i}" for i in range(len(b1))] + [f"m{i}" for i in range(len(b2))] + [f"c{i}" for i in range(len(b3))]
    blocks = [names[:len(b1)], names[len(b1):len(b1) + len(b2)], names[len(b1) + len(b2):]]
    return Dataset(X, y, names, tuple(f"row{i:05d}" for i in range(n))), blocks
