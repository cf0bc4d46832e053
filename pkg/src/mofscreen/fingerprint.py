"""Subset of MACCS-style structural keys evaluated on the periodic bond graph."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import elements
from .chemgraph import BondGraph, find_rings

GROUP_11_12 = frozenset({"Cu", "Ag", "Au", "Zn", "Cd", "Hg"})


@lru_cache(maxsize=None)
def key_catalog() -> dict[int, str]:
    out = {}
    with open(elements.data_path("maccs_keys.tsv")) as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            key, desc = line.rstrip("\n").split("\t", 1)
            out[int(key)] = desc
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class FingerprintVector:
    bits: dict

    @property
    def on(self) -> list[int]:
        return [k for k, v in self.bits.items() if v]

    def describe(self) -> list[tuple[int, str]]:
        cat = key_catalog()
        return [(k, cat[k]) for k in self.on]


def _predicates(g: BondGraph) -> dict:
    sym = np.array(g.symbols, dtype=object)
    table = elements.element_table()
    nb = [g.neighbors(i) for i in range(len(g))]
    deg = g.degree
    ring = g.ring_size > 0
    is_ = lambda e: sym == e
    hetero = np.array([s not in ("C", "H") for s in sym], dtype=bool)

    def any_nb(mask_i, test_j):
        return any(any(test_j(j) for j in nb[i]) for i in np.flatnonzero(mask_i))

    n_h = np.array([sum(sym[j] == "H" for j in nb[i]) for i in range(len(g))], dtype=int)
    h_on_hetero = sum(int(hetero[j]) for i in np.flatnonzero(is_("H")) for j in nb[i])
    return {
        6: any(table[s].is_lanthanide for s in sym),
        12: any(s in GROUP_11_12 for s in sym),
        45: any_nb(is_("N"), lambda j: sym[j] == "C" and deg[j] <= 3),
        69: h_on_hetero > 0,
        75: bool(np.any(is_("N") & ring)),
        97: bool(np.any(is_("O"))),
        100: any_nb(is_("H"), lambda j: sym[j] == "C" and ring[j]),
        131: h_on_hetero >= 2,
        138: bool(np.any(is_("C") & (n_h >= 2))),
        139: any_nb(is_("O"), lambda j: sym[j] == "H"),
        143: bool(np.any(is_("O") & ring)) or any_nb(is_("O"), lambda j: ring[j]),
        156: bool(np.any(is_("N") & (deg >= 3))),
        158: any_nb(is_("C"), lambda j: sym[j] == "N"),
        161: bool(np.any(is_("N"))),
        162: bool(np.any(g.aromatic_size == 6)),
        163: bool(np.any(g.ring_size == 6)),
    }


def maccs_subset(g: BondGraph, types=None) -> FingerprintVector:
    """Evaluate every catalogued key; ``types`` is accepted for interface symmetry."""
    if g.ring_size is None:
        find_rings(g)
    if len(g) == 0:
        return FingerprintVector({k: 0 for k in key_catalog()})
    pred = _predicates(g)
    return FingerprintVector({k: int(bool(pred[k])) for k in key_catalog()})


def fingerprint_columns() -> list[str]:
    return [f"Bit_{k}" for k in key_catalog()]


def fingerprint_feature_block(fp: FingerprintVector) -> dict:
    """Ordered ``Bit_<id>`` columns."""
    return {f"Bit_{k}": int(fp.bits.get(k, 0)) for k in key_catalog()}
