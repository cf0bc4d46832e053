"""Regression metrics and correlation matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LengthMismatch(ValueError):
    pass


@dataclass
class MetricReport:
    r2: float
    mae: float
    mse: float
    rmse: float
    n: int
    r2_paper_notation: float | None = None
    cv_scores: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"r2": self.r2, "mae": self.mae, "mse": self.mse, "rmse": self.rmse, "n": self.n,
                "r2_paper_notation": self.r2_paper_notation, "cv_scores": list(self.cv_scores)}


def _r2(sse, denom):
    if denom > 0:
        return 1.0 - sse / denom
    return 1.0 if sse == 0 else float("nan")


def metrics(y_true, y_pred, paper_notation: bool = False) -> MetricReport:
    """R^2 (against the mean of y_true), MAE, MSE and RMSE.

    With ``paper_notation`` the alternative R^2 whose denominator uses the
    mean of the predictions is reported alongside.
    """
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    if yt.shape != yp.shape:
        raise LengthMismatch(f"{yt.shape} vs {yp.shape}")
    if yt.ndim != 1 or len(yt) < 2:
        raise LengthMismatch("need two or more paired values")
    res = yt - yp
    sse = float(res @ res)
    mse = sse / len(yt)
    rep = MetricReport(_r2(sse, float(np.sum((yt - yt.mean()) ** 2))), float(np.mean(np.abs(res))),
                       mse, float(np.sqrt(mse)), len(yt))
    if paper_notation:
        rep.r2_paper_notation = _r2(sse, float(np.sum((yt - yp.mean()) ** 2)))
    return rep


def pearson_matrix(X, names=None):
    """Pearson r between columns.  Zero-variance columns are dropped and returned separately.

    Returns (matrix, kept_names, excluded_names).
    """
    X = np.asarray(X, dtype=float)
    names = list(names) if names is not None else [str(i) for i in range(X.shape[1])]
    sd = X.std(axis=0)
    keep = sd > 0
    Z = (X[:, keep] - X[:, keep].mean(axis=0)) / sd[keep]
    R = (Z.T @ Z) / len(X)
    R = np.clip(0.5 * (R + R.T), -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    kept = [n for n, k in zip(names, keep) if k]
    excluded = [n for n, k in zip(names, keep) if not k]
    return R, kept, excluded
