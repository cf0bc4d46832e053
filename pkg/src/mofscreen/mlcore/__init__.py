"""Tree-ensemble regression, metrics, correlation and TreeSHAP."""
from .trees import (DegenerateTarget, TooFewRows, Tree, TreeEnsemble, build_tree,
                    train_gbdt, train_random_forest)
from .metrics import LengthMismatch, MetricReport, metrics, pearson_matrix
from .shap import tree_shap
from .data import (Dataset, ImportanceRow, cross_validate, feature_importance_report,
                   three_block_dataset, train, tune)

__all__ = [
    "DegenerateTarget", "TooFewRows", "Tree", "TreeEnsemble", "build_tree", "train_gbdt",
    "train_random_forest", "LengthMismatch", "MetricReport", "metrics", "pearson_matrix",
    "tree_shap", "Dataset", "ImportanceRow", "cross_validate", "feature_importance_report",
    "three_block_dataset", "train", "tune",
]
