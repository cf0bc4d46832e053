from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mofscreen.chemgraph import (LIGAND_TYPES, METAL, RESIDUAL, assign_atom_types, dump_graph, find_rings,
                                 metal_descriptors, molecular_descriptors, perceive_bonds)
from mofscreen.structio import CrystalStructure

from conftest import benzene, cubic, in_box, methane, naphthalene, paddlewheel, pyridine


def pair(d, a="C", b="C"):
    return in_box((a, b), [[0, 0, 0], [d, 0, 0]])


# ------------------------------------------------------------------ bonds

def test_bond_examples():
    assert len(perceive_bonds(pair(1.54)).edges) == 1
    assert len(perceive_bonds(pair(2.5)).edges) == 0
    g = perceive_bonds(pair(0.3))
    assert len(g.edges) == 0
    assert g.suspicious and g.suspicious[0][:2] == (0, 1)


def test_periodic_bond_across_boundary():
    s = cubic(10.0, ("C", "C"), [[0.02, 0.5, 0.5], [0.87, 0.5, 0.5]])
    g = perceive_bonds(s)
    assert len(g.edges) == 1
    assert np.abs(g.shifts[0]).sum() == 1
    assert g.lengths[0] == pytest.approx(1.5)


# ------------------------------------------------------------------ rings

def _simple_cycles(n, edges):
    """Every simple cycle as a node set, by exhaustive DFS from its smallest node."""
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    cycles = set()

    def dfs(start, node, path):
        for nb in adj[node]:
            if nb == start and len(path) >= 3:
                cycles.add(frozenset(path))
            elif nb > start and nb not in path:
                dfs(start, nb, path + [nb])

    for s in range(n):
        dfs(s, s, [s])
    return cycles


def _oracle_ring_size(n, edges, max_size=8):
    size = np.zeros(n, dtype=int)
    for c in _simple_cycles(n, edges):
        if len(c) > max_size:
            continue
        for v in c:
            if size[v] == 0 or len(c) < size[v]:
                size[v] = len(c)
    return size


@pytest.mark.parametrize("build", [benzene, pyridine, naphthalene, methane])
def test_rings_match_exhaustive_enumeration(build):
    s = build()
    g = perceive_bonds(s)
    assert not np.any(g.shifts)
    np.testing.assert_array_equal(find_rings(g), _oracle_ring_size(len(s), g.edges.tolist()))


def test_benzene_ring():
    g = perceive_bonds(benzene())
    sizes = find_rings(g)
    assert list(sizes[:6]) == [6] * 6 and not sizes[6:].any()


def test_chain_has_no_rings():
    s = in_box(("C",) * 5, [[1.5 * k, 0.3 * (k % 2), 0] for k in range(5)])
    assert not find_rings(perceive_bonds(s)).any()


def test_naphthalene_fused_atoms_size_six():
    s = naphthalene()
    sizes = find_rings(perceive_bonds(s))
    assert sum(1 for sym in s.symbols if sym == "C") == 10
    assert all(sizes[i] == 6 for i, sym in enumerate(s.symbols) if sym == "C")


def test_periodic_ring_needs_zero_net_shift():
    # an infinite zigzag chain wraps the cell but is not a ring
    s = cubic(3.0, ("C", "C"), [[0.0, 0.5, 0.5], [0.5, 0.5, 0.5]])
    s = CrystalStructure("chain", (3.0, 20.0, 20.0), (90, 90, 90), ("C", "C"),
                         [[0.0, 0.5, 0.5], [0.5, 0.53, 0.5]])
    g = perceive_bonds(s)
    assert len(g.edges) == 2
    assert not find_rings(g).any()


def test_ring_across_cell_boundary():
    ring = np.array([[1.39 * np.cos(a), 1.39 * np.sin(a), 0.0] for a in np.arange(6) * np.pi / 3])
    s = cubic(12.0, ("C",) * 6, (ring % 12.0) / 12.0)
    g = perceive_bonds(s)
    assert np.any(g.shifts)
    assert list(find_rings(g)) == [6] * 6


# ------------------------------------------------------------------ typing

def test_benzene_and_methane_types():
    assert assign_atom_types(perceive_bonds(benzene()))[:6] == ["C_R"] * 6
    assert assign_atom_types(perceive_bonds(methane()))[0] == "C_3"


def test_pyridine_nitrogen_aromatic():
    assert assign_atom_types(perceive_bonds(pyridine()))[0] == "N_R"


def test_paddlewheel_oxygen_types():
    s = paddlewheel()
    types = assign_atom_types(perceive_bonds(s))
    o_types = Counter(t for sym, t in zip(s.symbols, types) if sym == "O")
    assert o_types == {"O_2": 8, "O_2_z": 1}
    assert Counter(t for sym, t in zip(s.symbols, types) if sym == "C") == {"C_2": 4}
    assert all(t == METAL for sym, t in zip(s.symbols, types) if sym == "Cu")


def test_free_carboxylate_oxygen():
    s = in_box(("C", "O", "O", "H"), [[0, 0, 0], [1.25, 0, 0], [-0.62, 1.08, 0], [-0.55, -0.95, 0]])
    types = assign_atom_types(perceive_bonds(s))
    assert types[1] == types[2] == "O_2"


def test_chain_carbon_types():
    s = in_box(("C", "C", "N"), [[0, 0, 0], [1.2, 0, 0], [2.35, 0, 0]])
    types = assign_atom_types(perceive_bonds(s))
    assert types[0] == RESIDUAL
    assert types[1] == "C_1"
    assert types[2] == "N_1"


# ------------------------------------------------------------------ metals

def test_zinc_predominant():
    s = paddlewheel("Zn")
    m = metal_descriptors(s)
    assert m.symbol == "Zn" and m.atomic_number == 30


def test_metal_ratio():
    rng = np.random.default_rng(0)
    s = cubic(30.0, ("Zn",) * 8 + ("C",) * 92, rng.random((100, 3)))
    assert metal_descriptors(s).ratio == pytest.approx(0.08)


def test_metal_tie_lower_z():
    s = cubic(30.0, ("Cu", "Zn", "Zn", "Cu", "O"), np.random.default_rng(1).random((5, 3)))
    assert metal_descriptors(s).symbol == "Cu"


def test_no_metal_block():
    m = metal_descriptors(benzene())
    assert m.no_metal and m.values() == (0.0,) * 7


# ------------------------------------------------------------------ invariants

def _normalized(s):
    return molecular_descriptors(s).columns()


def test_accounting_identity():
    for s in (paddlewheel(), benzene(), pyridine()):
        d = molecular_descriptors(s)
        assert sum(d.counts.values()) + d.metal_count + d.residual == len(s)
        assert len(d.counts) == len(LIGAND_TYPES) == 18


@settings(max_examples=10)
@given(st.randoms(use_true_random=False))
def test_permutation_invariance(rnd):
    s = paddlewheel()
    order = list(range(len(s)))
    rnd.shuffle(order)
    t = CrystalStructure(s.name, s.cell_lengths, s.cell_angles, tuple(s.symbols[i] for i in order),
                         s.frac[order])
    assert _normalized(t) == _normalized(s)


def test_replication_invariance():
    s = cubic(8.0, ("C",) * 6 + ("H",) * 6, benzene().cartesian / 8.0 % 1.0)
    base = molecular_descriptors(s)
    big = molecular_descriptors(s.replicated((2, 2, 2)))
    assert {k: 8 * v for k, v in base.counts.items()} == big.counts
    assert base.columns() == pytest.approx(big.columns(), rel=1e-12)


def test_dump_graph(tmp_path):
    g = perceive_bonds(benzene())
    types = assign_atom_types(g)
    dump_graph(g, tmp_path / "g.txt", types)
    lines = (tmp_path / "g.txt").read_text().splitlines()
    assert sum(l.startswith("node ") for l in lines) == 12
    assert sum(l.startswith("edge ") for l in lines) == 12
