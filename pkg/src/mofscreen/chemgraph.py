"""Periodic bond graph, ring perception, UFF4MOF-style atom typing and the molecular descriptor block."""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from . import elements
from .structio import CrystalStructure, perpendicular_widths

BOND_FLOOR = 0.4
BOND_TOLERANCE = 0.45

LIGAND_TYPES = ("C_1", "C_2", "C_3", "C_R", "N_1", "N_2", "N_3", "N_R",
                "O_2", "O_R", "O_3_f", "O_2_z", "H_", "F_", "Cl", "Br", "P_3+q", "S_R")
METAL_COLUMNS = ("metal_ratio", "metal_atomic_number", "metal_atomic_weight", "metal_atomic_radius",
                 "metal_polarizability", "metal_electron_affinity", "metal_electronegativity")
MOLECULAR_COLUMNS = LIGAND_TYPES + METAL_COLUMNS
METAL = "metal"
RESIDUAL = "residual"


@dataclass(eq=False)
class BondGraph:
    """Undirected periodic graph.  Edge (i, j, shift) joins site i with site j displaced by ``shift`` cells."""
    symbols: tuple
    edges: np.ndarray = field(repr=False)       # (E, 2) int
    shifts: np.ndarray = field(repr=False)      # (E, 3) int
    lengths: np.ndarray = field(repr=False)
    suspicious: list = field(default_factory=list, repr=False)
    ring_size: np.ndarray | None = field(default=None, repr=False)
    aromatic: np.ndarray | None = field(default=None, repr=False)
    aromatic_size: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.symbols)
        self.adjacency = [[] for _ in range(n)]
        for (i, j), s in zip(self.edges, self.shifts):
            s = tuple(int(v) for v in s)
            self.adjacency[i].append((int(j), s))
            self.adjacency[j].append((int(i), tuple(-v for v in s)))
        self.is_metal = np.array([elements.get(sym).is_metal for sym in self.symbols], dtype=bool)

    def __len__(self):
        return len(self.symbols)

    @property
    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=int)

    def neighbors(self, i) -> list:
        return [j for j, _ in self.adjacency[i]]

    def in_ring(self) -> np.ndarray:
        if self.ring_size is None:
            raise RuntimeError("run find_rings first")
        return self.ring_size > 0


def perceive_bonds(s: CrystalStructure, radii: dict | None = None, floor: float = BOND_FLOOR,
                   tolerance: float = BOND_TOLERANCE) -> BondGraph:
    """Bond iff floor < d < r_i + r_j + tolerance, over all periodic images."""
    radii = radii or elements.default_covalent_radii()
    n = len(s)
    if n == 0:
        return BondGraph((), np.zeros((0, 2), int), np.zeros((0, 3), int), np.zeros(0))
    rc = np.array([radii[sym] for sym in s.symbols], dtype=float)
    matrix = s.matrix
    cart = s.cartesian
    reach = 2.0 * rc.max() + tolerance
    nrep = [int(math.ceil(reach / w)) for w in perpendicular_widths(matrix)]
    shifts = np.array(list(product(*(range(-k, k + 1) for k in nrep))), dtype=int)
    img = (cart[None] + (shifts @ matrix)[:, None, :]).reshape(-1, 3)
    img_atom = np.tile(np.arange(n), len(shifts))
    img_shift = np.repeat(shifts, n, axis=0)
    pairs = cKDTree(cart).query_ball_tree(cKDTree(img), reach)
    edges, eshift, lengths, suspicious = [], [], [], []
    for i, cand in enumerate(pairs):
        if not cand:
            continue
        cand = np.asarray(cand)
        j, sh = img_atom[cand], img_shift[cand]
        d = np.linalg.norm(img[cand] - cart[i], axis=1)
        # keep each undirected edge once
        keep = (j > i) | ((j == i) & _positive(sh))
        for jj, ss, dd in zip(j[keep], sh[keep], d[keep]):
            if dd <= floor:
                if dd > 0 or jj != i:
                    suspicious.append((i, int(jj), float(dd)))
                continue
            if dd < rc[i] + rc[jj] + tolerance:
                edges.append((i, int(jj)))
                eshift.append(ss)
                lengths.append(dd)
    return BondGraph(tuple(s.symbols), np.array(edges, dtype=int).reshape(-1, 2),
                     np.array(eshift, dtype=int).reshape(-1, 3), np.array(lengths), suspicious)


def _positive(sh: np.ndarray) -> np.ndarray:
    """Lexicographically positive shift vectors."""
    out = np.zeros(len(sh), dtype=bool)
    undecided = np.ones(len(sh), dtype=bool)
    for k in range(3):
        out |= undecided & (sh[:, k] > 0)
        undecided &= sh[:, k] == 0
    return out


def _edge_cycle(g: BondGraph, u, v, s, allowed, max_size) -> int:
    """Length of the shortest cycle through edge (u, v, s) with zero net shift, or 0."""
    start = (v, s)
    target = (u, (0, 0, 0))
    dist = {start: 1}
    queue = deque([start])
    while queue:
        node, off = queue.popleft()
        d = dist[(node, off)]
        if d >= max_size:
            break
        for nb, sh in g.adjacency[node]:
            if not allowed[nb]:
                continue
            noff = (off[0] + sh[0], off[1] + sh[1], off[2] + sh[2])
            # the edge itself may not be walked back
            if node == v and off == s and nb == u and noff == (0, 0, 0):
                continue
            state = (nb, noff)
            if state == target:
                return d + 1 if d + 1 <= max_size else 0
            if state not in dist:
                dist[state] = d + 1
                queue.append(state)
    return 0


def _smallest_rings(g: BondGraph, allowed: np.ndarray, max_size: int) -> np.ndarray:
    size = np.zeros(len(g), dtype=int)
    for (u, v), s in zip(g.edges, g.shifts):
        if not (allowed[u] and allowed[v]):
            continue
        c = _edge_cycle(g, int(u), int(v), tuple(int(x) for x in s), allowed, max_size)
        if c:
            for x in (u, v):
                if size[x] == 0 or c < size[x]:
                    size[x] = c
    return size


def find_rings(g: BondGraph, max_size: int = 8) -> np.ndarray:
    """Smallest ring size per node (0 = acyclic) over the organic (metal-free) subgraph.

    Also records ``g.aromatic``: membership of a 5- or 6-ring whose members
    all have at most three neighbours.
    """
    organic = ~g.is_metal
    g.ring_size = _smallest_rings(g, organic, max_size)
    sp2 = organic & (g.degree <= 3)
    ar = _smallest_rings(g, sp2, 6)
    g.aromatic = (ar == 5) | (ar == 6)
    g.aromatic_size = np.where(g.aromatic, ar, 0)
    return g.ring_size


def assign_atom_types(g: BondGraph) -> list[str]:
    if g.ring_size is None:
        find_rings(g)
    deg = g.degree
    types = []
    for i, sym in enumerate(g.symbols):
        nbrs = g.neighbors(i)
        n_metal = int(sum(g.is_metal[j] for j in nbrs))
        n_other = len(nbrs) - n_metal
        ring = g.ring_size[i] > 0
        if g.is_metal[i]:
            t = METAL
        elif sym == "C":
            t = "C_R" if g.aromatic[i] else {4: "C_3", 3: "C_2", 2: "C_1"}.get(deg[i], RESIDUAL)
        elif sym == "N":
            if g.aromatic[i]:
                t = "N_R"
            elif deg[i] >= 3:
                t = "N_3"
            else:
                t = {2: "N_2", 1: "N_1"}.get(deg[i], RESIDUAL)
        elif sym == "O":
            if ring:
                t = "O_R"
            elif n_metal >= 2 and deg[i] in (3, 4):
                t = "O_2_z" if deg[i] == 3 else "O_3_f"
            elif n_other == 1:
                t = "O_2"
            else:
                t = "O_3_f"
        elif sym == "H":
            t = "H_"
        elif sym == "F":
            t = "F_"
        elif sym in ("Cl", "Br"):
            t = sym
        elif sym == "P" and deg[i] == 4 and n_metal > 0:
            t = "P_3+q"
        elif sym == "S" and ring:
            t = "S_R"
        else:
            t = RESIDUAL
        types.append(t)
    return types


@dataclass
class MetalBlock:
    symbol: str | None
    ratio: float
    atomic_number: float
    atomic_weight: float
    atomic_radius: float
    polarizability: float
    electron_affinity: float
    electronegativity: float
    no_metal: bool = False

    def values(self) -> tuple:
        return (self.ratio, self.atomic_number, self.atomic_weight, self.atomic_radius,
                self.polarizability, self.electron_affinity, self.electronegativity)


def metal_descriptors(s: CrystalStructure) -> MetalBlock:
    """Properties of the predominant metal (most frequent; ties -> lower Z)."""
    table = elements.element_table()
    metals = Counter(sym for sym in s.symbols if table[sym].is_metal)
    if not metals:
        return MetalBlock(None, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, no_metal=True)
    sym = min(metals, key=lambda m: (-metals[m], table[m].atomic_number))
    e = table[sym]
    clean = lambda v: 0.0 if not np.isfinite(v) else float(v)
    return MetalBlock(sym, sum(metals.values()) / len(s), float(e.atomic_number), e.mass,
                      clean(e.atomic_radius_pm), clean(e.polarizability),
                      clean(e.electron_affinity), clean(e.mulliken_en))


@dataclass
class MolecularDescriptors:
    counts: dict            # raw per-cell counts for the 18 ligand types
    natoms: int
    metal: MetalBlock
    metal_count: int
    residual: int

    def columns(self) -> dict:
        n = max(self.natoms, 1)
        out = {t: self.counts[t] / n for t in LIGAND_TYPES}
        out.update(zip(METAL_COLUMNS, self.metal.values()))
        return out


def molecular_descriptors(s: CrystalStructure, g: BondGraph | None = None,
                          types: list | None = None) -> MolecularDescriptors:
    if g is None:
        g = perceive_bonds(s)
    if types is None:
        types = assign_atom_types(g)
    tally = Counter(types)
    counts = {t: tally.get(t, 0) for t in LIGAND_TYPES}
    return MolecularDescriptors(counts, len(s), metal_descriptors(s), tally.get(METAL, 0),
                                tally.get(RESIDUAL, 0))


def dump_graph(g: BondGraph, path, types=None) -> None:
    """Edge list: i j sa sb sc length, preceded by one node line per site."""
    with open(path, "w") as fh:
        fh.write("# nodes: index symbol degree ring_size type\n")
        for i, sym in enumerate(g.symbols):
            ring = int(g.ring_size[i]) if g.ring_size is not None else -1
            t = types[i] if types is not None else "-"
            fh.write(f"node {i} {sym} {len(g.adjacency[i])} {ring} {t}\n")
        fh.write("# edges: i j shift_a shift_b shift_c length\n")
        for (i, j), s, d in zip(g.edges, g.shifts, g.lengths):
            fh.write(f"edge {i} {j} {s[0]} {s[1]} {s[2]} {d:.4f}\n")
