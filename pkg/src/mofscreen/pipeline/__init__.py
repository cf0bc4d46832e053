"""Batch screening: configuration, descriptor table, analyses and the CLI."""
from .config import ConfigError, ScreeningConfig, load_config, parse_config
from .table import DescriptorTable, EmptySelection, SchemaMismatch
from .screen import ScreenResult, process_structure, screen, structure_seed, table_from_records
from .analysis import (Candidate, ExplainReport, WindowSummary, best_window, top_candidates,
                       train_and_explain, train_models, window_analysis)

__all__ = [
    "ConfigError", "ScreeningConfig", "load_config", "parse_config", "DescriptorTable",
    "EmptySelection", "SchemaMismatch", "ScreenResult", "process_structure", "screen",
    "structure_seed", "table_from_records", "Candidate", "ExplainReport", "WindowSummary",
    "best_window", "top_candidates", "train_and_explain", "train_models", "window_analysis",
]
