"""Exact path-dependent TreeSHAP via per-leaf polynomial products, vectorised over rows."""
from __future__ import annotations

from math import factorial

import numpy as np

from .trees import Tree, TreeEnsemble


def _leaf_paths(tree: Tree):
    """Yield (leaf, [(node, feature, went_left)]) for every leaf."""
    stack = [(0, [])]
    while stack:
        node, path = stack.pop()
        f = tree.feature[node]
        if f < 0:
            yield node, path
            continue
        stack.append((tree.right[node], path + [(node, f, False)]))
        stack.append((tree.left[node], path + [(node, f, True)]))


def _shapley_weights(d: int) -> np.ndarray:
    return np.array([factorial(k) * factorial(d - k - 1) / factorial(d) for k in range(d)])


def tree_shap_single(tree: Tree, X: np.ndarray, nfeat: int) -> np.ndarray:
    """SHAP values of one tree for rows X, shape (B, nfeat).

    For each leaf, the path game is a product over the distinct path features
    j of z_j (cover fraction, feature absent) or o_j (x follows the path,
    feature present).  Feature i gets v * (o_i - z_i) * sum_k c_k w_k with
    c_k the coefficients of prod_{j != i} (z_j + o_j t).
    """
    B = len(X)
    phi = np.zeros((B, nfeat))
    for leaf, path in _leaf_paths(tree):
        if not path:
            continue
        feats = sorted({f for _, f, _ in path})
        d = len(feats)
        col = {f: k for k, f in enumerate(feats)}
        z = np.ones(d)
        o = np.ones((B, d))
        for node, f, went_left in path:
            child = tree.left[node] if went_left else tree.right[node]
            k = col[f]
            z[k] *= tree.cover[child] / tree.cover[node]
            goes = X[:, f] <= tree.threshold[node]
            o[:, k] *= goes if went_left else ~goes
        # Q[b, i, :] = coefficients of prod_{j != i}(z_j + o_j t)
        Q = np.zeros((B, d, d))
        Q[:, :, 0] = 1.0
        for j in range(d):
            nq = Q * z[j]
            nq[:, :, 1:] += Q[:, :, :-1] * o[:, j, None, None]
            nq[:, j, :] = Q[:, j, :]
            Q = nq
        s = Q @ _shapley_weights(d)
        contrib = tree.value[leaf] * (o - z[None, :]) * s
        phi[:, feats] += contrib
    return phi


def tree_shap(e: TreeEnsemble, X) -> np.ndarray:
    """Per-feature attributions with sum(phi) = predict(x) - e.expected_value."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    phi = np.zeros(X.shape)
    for t in e.trees:
        phi += tree_shap_single(t, X, X.shape[1])
    return e.scale * phi
