"""Table-level analyses: descriptor windows, model training + explanation, top candidates."""
from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fingerprint import key_catalog
from ..mlcore import (DegenerateTarget, TooFewRows, feature_importance_report, metrics,
                      pearson_matrix, train, tune)
from ..mlcore.trees import MIN_TRAIN_ROWS
from . import svg
from .config import ScreeningConfig
from .table import DescriptorTable, EmptySelection

log = logging.getLogger(__name__)

MODEL_KINDS = ("forest", "boosted")
RECOMMENDED_ROWS = 50


# ------------------------------------------------------------ window analysis

@dataclass
class WindowSummary:
    feature: str
    target: str
    edges: np.ndarray
    counts: np.ndarray
    mean: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray
    selectivity: np.ndarray
    window: tuple          # (low edge, high edge) of the best contiguous window

    def rows(self) -> list[dict]:
        out = []
        for i in range(len(self.counts)):
            out.append({"bin_low": self.edges[i], "bin_high": self.edges[i + 1], "count": int(self.counts[i]),
                        "mean": self.mean[i], "q25": self.q25[i], "median": self.median[i],
                        "q75": self.q75[i], "mean_selectivity": self.selectivity[i],
                        "in_window": bool(self.window[0] <= self.edges[i] and self.edges[i + 1] <= self.window[1])})
        return out


def best_window(mean: np.ndarray, frac: float = 0.9) -> tuple[int, int]:
    """Contiguous bin range around the peak whose means stay >= frac * peak."""
    finite = np.isfinite(mean)
    if not finite.any():
        raise EmptySelection("no populated bins")
    peak = int(np.nanargmax(np.where(finite, mean, -np.inf)))
    cut = frac * mean[peak]
    lo = hi = peak
    while lo > 0 and finite[lo - 1] and mean[lo - 1] >= cut:
        lo -= 1
    while hi < len(mean) - 1 and finite[hi + 1] and mean[hi + 1] >= cut:
        hi += 1
    return lo, hi


def window_analysis(t: DescriptorTable, feature: str = "LCD", bins: int = 10,
                    target: str = "I2_uptake", eligible_only: bool = True) -> WindowSummary:
    sel = t.subset(t.eligible()) if eligible_only else t
    x, y = sel.column(feature), sel.column(target)
    sv = sel.column("I2_selectivity")
    ok = np.isfinite(x) & np.isfinite(y)
    if not ok.any():
        raise EmptySelection(f"no rows with finite {feature} and {target}")
    x, y, sv = x[ok], y[ok], sv[ok]
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        bins, hi = 1, lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    stats = {k: np.full(bins, np.nan) for k in ("mean", "q25", "median", "q75", "sel")}
    counts = np.bincount(which, minlength=bins)
    for b in range(bins):
        yy = y[which == b]
        if len(yy):
            stats["mean"][b] = yy.mean()
            stats["q25"][b], stats["median"][b], stats["q75"][b] = np.quantile(yy, [0.25, 0.5, 0.75])
            s = sv[which == b]
            s = s[np.isfinite(s)]
            if len(s):
                stats["sel"][b] = s.mean()
    a, b = best_window(stats["mean"])
    return WindowSummary(feature, target, edges, counts, stats["mean"], stats["q25"], stats["median"],
                         stats["q75"], stats["sel"], (float(edges[a]), float(edges[b + 1])))


def write_window(ws: WindowSummary, t: DescriptorTable, out_dir, eligible_only: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = ws.rows()
    with open(out / f"window_{ws.feature}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    sel = t.subset(t.eligible()) if eligible_only else t
    centres = 0.5 * (ws.edges[:-1] + ws.edges[1:])
    (out / f"window_{ws.feature}.svg").write_text(svg.scatter(
        sel.column(ws.feature), sel.column(ws.target),
        title=f"{ws.target} vs {ws.feature}; window {ws.window[0]:.2f}-{ws.window[1]:.2f}",
        xlabel=ws.feature, ylabel=ws.target, line=(centres, ws.mean)))


# ----------------------------------------------------------- train + explain

@dataclass
class ExplainReport:
    feature_set: str
    target: str
    n_train: int
    n_test: int
    metrics: dict = field(default_factory=dict)        # kind -> MetricReport
    params: dict = field(default_factory=dict)
    rankings: dict = field(default_factory=dict)       # kind -> list[ImportanceRow]
    degenerate: bool = False
    models: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"feature_set": self.feature_set, "target": self.target, "n_train": self.n_train,
                "n_test": self.n_test, "degenerate": self.degenerate, "params": self.params,
                "metrics": {k: m.to_dict() for k, m in self.metrics.items()},
                "top_features": {k: [r.feature for r in v[:20]] for k, v in self.rankings.items()}}


def train_models(t: DescriptorTable, cfg: ScreeningConfig):
    """Train both model kinds on the configured feature set; returns (report, train, test)."""
    d = t.dataset(cfg.feature_set, cfg.target)
    if len(d) < MIN_TRAIN_ROWS:
        raise TooFewRows(f"{len(d)} eligible rows; at least {MIN_TRAIN_ROWS} are required")
    if len(d) < RECOMMENDED_ROWS:
        warnings.warn(f"only {len(d)} eligible rows; metrics will be noisy", UserWarning, stacklevel=2)
    tr, te = d.split(cfg.test_fraction, cfg.seed)
    if len(te) < 2:
        te = tr
    rep = ExplainReport(cfg.feature_set, cfg.target, len(tr), len(te))
    for kind in MODEL_KINDS:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateTarget)
            params = {}
            if cfg.tune and np.ptp(tr.y) > 0 and len(tr) >= 2 * cfg.cv_folds:
                params, _, _ = tune(kind, tr, k=cfg.cv_folds, seed=cfg.seed)
            model = train(kind, tr, seed=cfg.seed, **params)
        rep.degenerate |= any(issubclass(w.category, DegenerateTarget) for w in caught)
        rep.params[kind] = params
        rep.models[kind] = model
        rep.metrics[kind] = metrics(te.y, model.predict(te.X), paper_notation=cfg.r2_paper_notation)
    return rep, tr, te


def explain_model(model, d, out_dir, kind: str, top: int = 20):
    """SHAP ranking, per-sample SHAP values, Pearson matrix of the top features."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, phi = feature_importance_report(model, d.X, d.names)
    with open(out / f"shap_ranking_{kind}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "mean_abs_shap", "mean_shap", "value_shap_correlation"])
        for i, r in enumerate(rows[:top], 1):
            w.writerow([i, r.feature, repr(r.mean_abs_shap), repr(r.mean_shap), repr(r.sign)])
    with open(out / f"shap_values_{kind}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *d.names])
        for sid, p in zip(d.ids, phi):
            w.writerow([sid, *map(repr, map(float, p))])
    names = [r.feature for r in rows[:top]]
    idx = [d.names.index(n) for n in names]
    R, kept, excluded = pearson_matrix(d.X[:, idx], names)
    with open(out / f"pearson_top{top}_{kind}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *kept])
        for n, line in zip(kept, R):
            w.writerow([n, *map(repr, map(float, line))])
        if excluded:
            w.writerow(["# zero variance, excluded", *excluded])
    (out / f"pearson_top{top}_{kind}.svg").write_text(svg.heatmap(R, kept, f"Pearson r, top {top} features ({kind})"))
    return rows, phi


def train_and_explain(t: DescriptorTable, cfg: ScreeningConfig, out_dir) -> ExplainReport:
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    rep, tr, te = train_models(t, cfg)
    for kind, model in rep.models.items():
        (out / "models" / f"{kind}.json").write_text(model.to_json() + "\n")
        pred = model.predict(te.X)
        (out / f"parity_{kind}.svg").write_text(svg.scatter(
            te.y, pred, title=f"{kind}: R2 = {rep.metrics[kind].r2:.3f}", xlabel=f"simulated {cfg.target}",
            ylabel=f"predicted {cfg.target}", diagonal=True))
        rep.rankings[kind], _ = explain_model(model, te, out, kind)
    (out / "metrics.json").write_text(json.dumps(rep.summary(), indent=1, sort_keys=True, default=float) + "\n")
    return rep


# ------------------------------------------------------------ top candidates

@dataclass
class Candidate:
    id: str
    value: float
    bits: list            # [(key id, description)]


def top_candidates(t: DescriptorTable, k: int, target: str = "I2_uptake",
                   eligible_only: bool = True) -> list[Candidate]:
    """Best k rows by target (ties by id) with their fingerprint decomposition."""
    if k <= 0:
        return []
    sel = t.subset(t.eligible()) if eligible_only else t
    vals = sel.column(target)
    order = sorted((i for i in range(len(sel)) if np.isfinite(vals[i])),
                   key=lambda i: (-vals[i], sel.ids[i]))
    cat = key_catalog()
    out = []
    for i in order[:k]:
        row = sel.rows[i]
        bits = [(key, cat[key]) for key in cat if float(row.get(f"Bit_{key}", 0) or 0) > 0.5]
        out.append(Candidate(sel.ids[i], float(vals[i]), bits))
    return out


def shared_bits(cands: list[Candidate]) -> list[int]:
    if not cands:
        return []
    common = set(k for k, _ in cands[0].bits)
    for c in cands[1:]:
        common &= {k for k, _ in c.bits}
    return sorted(common)


def write_candidates(cands: list[Candidate], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "id", "value", "bits"])
        for i, c in enumerate(cands, 1):
            w.writerow([i, c.id, repr(c.value), " ".join(f"Bit_{k}" for k, _ in c.bits)])
