"""Versioned column schema of the descriptor table."""
from __future__ import annotations

from functools import lru_cache

from .. import elements

SCHEMA_VERSION = 1
SCHEMA_FILE = f"descriptor_schema_v{SCHEMA_VERSION}.txt"

STRUCTURAL = ("PLD", "LCD", "void_fraction", "surface_area", "pore_volume", "density")
CHEMICAL = ("I2_Henry", "I2_heat", "H2O_Henry", "H2O_heat", "N2_Henry", "N2_heat", "O2_Henry", "O2_heat")
SPECIES = ("I2", "N2", "O2", "H2O")
TARGET_COLUMNS = tuple(f"{s}_uptake" for s in SPECIES) + ("I2_selectivity",)
ERROR_COLUMNS = tuple(f"{s}_uptake_err" for s in SPECIES)
STATUS_COLUMNS = ("eligible", "converged", "no_metal", "residual_atoms", "chem_degenerate", "selectivity_flag")


@lru_cache(maxsize=None)
def header() -> tuple:
    """Column names as stored in the shipped schema file."""
    with open(elements.data_path(SCHEMA_FILE)) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    return tuple(lines[0].split(","))


def header_line() -> str:
    return ",".join(header())


def column_groups() -> dict:
    from ..chemgraph import MOLECULAR_COLUMNS
    from ..fingerprint import fingerprint_columns
    return {"id": ("id",), "structural": STRUCTURAL, "molecular": tuple(MOLECULAR_COLUMNS),
            "chemical": CHEMICAL, "fingerprint": tuple(fingerprint_columns()),
            "targets": TARGET_COLUMNS, "errors": ERROR_COLUMNS, "status": STATUS_COLUMNS}


def expected_header() -> tuple:
    """Header assembled from the module column lists (must equal the schema file)."""
    return tuple(c for cols in column_groups().values() for c in cols)


def feature_columns(feature_set: str) -> tuple:
    g = column_groups()
    return {
        "structural": g["structural"],
        "molecular": g["structural"] + g["molecular"],
        "chemical": g["structural"] + g["molecular"] + g["chemical"],
        "fingerprint": g["structural"] + g["fingerprint"] + g["chemical"],
    }[feature_set]
