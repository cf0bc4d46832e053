"""Element property table shipped with the package (``data/elements.csv``)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
import math


@dataclass(frozen=True)
class Element:
    symbol: str
    atomic_number: int
    mass: float                 # g/mol
    covalent_radius: float      # A
    vdw_radius: float           # A
    atomic_radius_pm: float
    polarizability: float       # A^3
    electron_affinity: float    # eV
    mulliken_en: float          # eV
    is_metal: bool
    is_lanthanide: bool
    group: int


def _num(text: str) -> float:
    return float(text) if text else math.nan


def data_path(name: str) -> Path:
    return Path(str(resources.files("mofscreen") / "data" / name))


@lru_cache(maxsize=None)
def element_table() -> dict[str, Element]:
    table = {}
    with open(data_path("elements.csv"), newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            table[row["symbol"]] = Element(
                symbol=row["symbol"],
                atomic_number=int(row["atomic_number"]),
                mass=float(row["mass"]),
                covalent_radius=float(row["covalent_radius"]),
                vdw_radius=float(row["vdw_radius"]),
                atomic_radius_pm=_num(row["atomic_radius_pm"]),
                polarizability=_num(row["polarizability"]),
                electron_affinity=_num(row["electron_affinity"]),
                mulliken_en=_num(row["mulliken_en"]),
                is_metal=row["is_metal"] == "1",
                is_lanthanide=row["is_lanthanide"] == "1",
                group=int(row["group"]),
            )
    return table


def normalize_symbol(text: str) -> str:
    """'ZN', 'zn2+', 'Zn1' -> 'Zn'.  Returns '' if no letters."""
    letters = ""
    for ch in text.strip():
        if ch.isalpha():
            letters += ch
        else:
            break
    if not letters:
        return ""
    letters = letters[:2]
    cand = letters[0].upper() + letters[1:].lower()
    table = element_table()
    if cand in table:
        return cand
    if cand[0] in table:
        return cand[0]
    return cand


def get(symbol: str) -> Element:
    return element_table()[symbol]


def read_radii(path: str | Path) -> dict[str, float]:
    """Parse a radii file: ``element radius`` per line, ``#`` comments."""
    radii = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sym, value = line.split()[:2]
        radii[sym] = float(value)
    return radii


def default_geometry_radii() -> dict[str, float]:
    return read_radii(data_path("radii.txt"))


def default_covalent_radii() -> dict[str, float]:
    return {s: e.covalent_radius for s, e in element_table().items()}
