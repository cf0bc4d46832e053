"""Acceptance criteria.  Each test prints one PASS/FAIL line; the lines are repeated after the run."""
import contextlib
import itertools
import math
import shutil
import statistics
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.special import erf

import conftest
from conftest import benzene, cubic, framework_of, in_box, paddlewheel, point_guest, pyridine, random_fixture
from mofscreen import elements
from mofscreen.chemgraph import perceive_bonds
from mofscreen.constants import COULOMB_K, KB, R_GAS
from mofscreen.fingerprint import maccs_subset
from mofscreen.gcmc import MoveWeights, SimulationConditions, run_gcmc, selectivity
from mofscreen.mlcore import TreeEnsemble, build_tree, metrics, three_block_dataset, train, tree_shap
from mofscreen.pipeline import load_config, screen
from mofscreen.poregeom import build_distance_grid, largest_cavity_diameter, pore_limiting_diameter
from mofscreen.potential import Configuration, ewald_energy, guest_insertion_energy, load_forcefield
from mofscreen.structio import read_cif
from mofscreen.widom import framework_density_kg_m3, heat_of_adsorption, henry_coefficient, widom_sample

from test_mlcore import _brute_shapley, uniform
from test_potential import _brute_pair_terms, _guest_charges, _others, _random_pose, _reciprocal_reference

TOY = Path(elements.data_path("toy_corpus"))


@contextlib.contextmanager
def criterion(num, title):
    """Record PASS/FAIL for one criterion; failures still propagate to pytest."""
    detail = {}
    try:
        yield detail
    except BaseException as exc:
        line = f"FAIL  criterion {num:2d}: {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        conftest.ACCEPTANCE[num] = line
        print(line)
        raise
    extra = "; ".join(f"{k}={v}" for k, v in detail.items())
    line = f"PASS  criterion {num:2d}: {title}" + (f" ({extra})" if extra else "")
    conftest.ACCEPTANCE[num] = line
    print(line)


# 1 -------------------------------------------------------------------------


@pytest.mark.slow
def test_01_ideal_gas():
    with criterion(1, "ideal-gas GCMC within 1% in under 60 s") as d:
        ff = load_forcefield()
        t0 = time.perf_counter()
        fw = framework_of(cubic(30.0), ff)
        c = SimulationConditions(423.0, 1.0e5, [point_guest()], 1000, 100_000, seed=11,
                                 weights=MoveWeights(0, 0, 0, 1, 0))
        r = run_gcmc(fw, c)
        elapsed = time.perf_counter() - t0
        exact = 1.0e5 * 30.0 ** 3 * 1e-30 / (KB * 423.0)
        got = r.species[0].molecules
        d.update(N=f"{got:.5f}", exact=f"{exact:.5f}", seconds=f"{elapsed:.1f}")
        assert abs(got - exact) <= 0.01 * exact
        assert elapsed < 60.0


# 2 -------------------------------------------------------------------------


def _madelung(alpha, a=5.6402):
    na = [[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]]
    cl = [[x + 0.5 - (x >= 0.5), y, z] for x, y, z in na]
    s = cubic(a, ("Na",) * 4 + ("Cl",) * 4, np.array(na + cl), charges=np.array([1.0] * 4 + [-1.0] * 4))
    e = ewald_energy(s.cartesian, s.charges, s.matrix, alpha, (8, 8, 8), 20.0).total
    # 8 ions, 4 formula units; nearest-neighbour distance a/2
    return -e * (a / 2) / (4 * COULOMB_K)


def test_02_ewald_madelung():
    with criterion(2, "Madelung constant within 1e-4; alpha independence within 1e-5") as d:
        vals = [_madelung(a) for a in (0.2, 0.25, 0.3, 0.35, 0.4)]
        spread = (max(vals) - min(vals)) / abs(vals[2])
        d.update(M=f"{vals[2]:.7f}", spread=f"{spread:.1e}")
        assert abs(vals[2] - 1.747565) < 1e-4
        assert spread <= 1e-5


# 3 -------------------------------------------------------------------------


def test_03_energy_oracle():
    with criterion(3, "engine energies equal brute force to 1e-10 relative") as d:
        ff = load_forcefield()
        base = random_fixture(50, 25.0, seed=3)
        fw = framework_of(base.with_charges(np.tile([0.4, -0.4], 25)), ff, use_charges=True)
        species = [ff.guests["N2"], ff.guests["H2O"], ff.guests["I2"]]
        state = Configuration(fw, species)
        rng = np.random.default_rng(21)
        while len(state.molecules) < 8:
            sp = len(state.molecules) % 3
            pose = _random_pose(species[sp], rng, 25.0)
            if math.isfinite(state.molecule_energy(sp, pose).total):
                state.add(sp, pose)
        nfw = len(fw.positions)
        kcut = 2 * fw.alpha * math.sqrt(-math.log(1e-6))
        worst, checked = 0.0, 0

        def rel(a, b):
            return abs(a - b) / max(abs(b), 1e-300) if b != 0 else abs(a)

        for sp, g in enumerate(species):
            for _ in range(4):
                pose = _random_pose(g, rng, 25.0)
                e = guest_insertion_energy(state, sp, pose)
                if not math.isfinite(e.total):
                    continue
                pos, eps, sig, q = _others(state)
                lj_fw, re_fw = _brute_pair_terms(pose, g.sites, (pos[:nfw], eps[:nfw], sig[:nfw], q[:nfw]),
                                                 fw.matrix, fw.alpha)
                lj_gg, re_gg = _brute_pair_terms(pose, g.sites, (pos[nfw:], eps[nfw:], sig[nfw:], q[nfw:]),
                                                 fw.matrix, fw.alpha)
                errs = [rel(e.lj_guest_framework, lj_fw), rel(e.lj_guest_guest, lj_gg),
                        rel(e.ewald_real, re_fw + re_gg)]
                if g.is_charged:
                    gp, gq = _guest_charges(state)
                    before = _reciprocal_reference(np.vstack([fw.positions, gp]), np.concatenate([fw.charges, gq]),
                                                   fw.matrix, fw.alpha, fw.kmax, kcut)
                    after = _reciprocal_reference(np.vstack([fw.positions, gp, pose]),
                                                  np.concatenate([fw.charges, gq, g.charges]),
                                                  fw.matrix, fw.alpha, fw.kmax, kcut)
                    qq = g.charges
                    intra = -COULOMB_K * fw.alpha / math.sqrt(math.pi) * float(qq @ qq)
                    for i, j in itertools.combinations(range(len(qq)), 2):
                        r = np.linalg.norm(pose[i] - pose[j])
                        intra -= COULOMB_K * qq[i] * qq[j] * erf(fw.alpha * r) / r
                    errs += [rel(e.ewald_reciprocal, after - before), rel(e.ewald_self_and_exclusion, intra)]
                worst = max(worst, *errs)
                checked += 1
        d.update(poses=checked, worst_rel=f"{worst:.1e}")
        assert checked >= 6
        assert worst < 1e-10


# 4 -------------------------------------------------------------------------


def test_04_pore_geometry():
    with criterion(4, "simple-cubic LCD/PLD within 2x grid spacing; PLD <= LCD on the corpus") as d:
        a, r, h = 10.0, 1.7, 0.2
        g = build_distance_grid(cubic(a, ("C",), [[0, 0, 0]]), h, {"C": r})
        lcd, pld = largest_cavity_diameter(g), pore_limiting_diameter(g)
        lcd0, pld0 = 2 * (a * math.sqrt(3) / 2 - r), 2 * (a / math.sqrt(2) - r)
        d.update(LCD=f"{lcd:.3f}/{lcd0:.3f}", PLD=f"{pld:.3f}/{pld0:.3f}")
        assert abs(lcd - lcd0) <= 2 * h
        assert abs(pld - pld0) <= 2 * h
        for p in sorted(TOY.glob("*.cif")):
            gg = build_distance_grid(read_cif(p), h)
            assert pore_limiting_diameter(gg) <= largest_cavity_diameter(gg), p.stem


# 5 -------------------------------------------------------------------------


@pytest.mark.slow
def test_05_henry_consistency():
    with criterion(5, "low-fugacity GCMC uptake equals K_H f M within 5%; empty-box Widom exact") as d:
        ff = load_forcefield()
        empty = framework_of(cubic(30.0), ff)
        for name in ("N2", "I2", "H2O"):
            smp = widom_sample(empty, ff.guests[name], 423.0, 10_000, seed=2)
            assert smp.w == 1.0 and smp.uw == 0.0
            assert heat_of_adsorption(smp.w, smp.uw, 423.0) == R_GAS * 423.0 / 1000.0

        fw = framework_of(random_fixture(50, 25.0, seed=1, min_dist=3.0), ff)
        t = 300.0
        g = point_guest("Ar", eps=300.0, sig=3.4, mw=39.948)
        smp = widom_sample(fw, g, t, 200_000, seed=3)
        kh = henry_coefficient(smp.w, t, framework_density_kg_m3(fw))
        f = 0.1 * KB * t / (smp.w * fw.volume * 1e-30)
        c = SimulationConditions(t, f, [g], 1000, 40_000, seed=4, weights=MoveWeights(1, 0, 0, 1, 0))
        r = run_gcmc(fw, c)
        expected = kh * f * g.molweight          # mg/g
        got = r.species[0].uptake_mg_g
        d.update(uptake=f"{got:.5g}", henry=f"{expected:.5g}", rel=f"{got / expected - 1:+.2%}")
        assert abs(got / expected - 1) < 0.05


# 6 -------------------------------------------------------------------------


def test_06_tree_shap():
    with criterion(6, "TreeSHAP local accuracy < 1e-9 and brute-force equivalence to 1e-9") as d:
        worst_local = 0.0
        ds, _ = three_block_dataset(200, seed=3)
        for kind, kw in (("forest", {"n_trees": 20}), ("boosted", {"n_rounds": 60})):
            model = train(kind, ds, seed=1, **kw)
            phi = tree_shap(model, ds.X)
            worst_local = max(worst_local, float(np.abs(phi.sum(axis=1) - (model.predict(ds.X)
                                                                             - model.expected_value)).max()))
        worst_brute = 0.0
        for seed, depth, m in itertools.product(range(4), (1, 2, 3), (1, 2, 3, 4)):
            X = uniform(50, m, seed)
            y = np.random.default_rng(seed).normal(size=50) + X.sum(axis=1)
            tree = build_tree(X, y, max_depth=depth)
            phi = tree_shap(TreeEnsemble("forest", [tree], 0.0, 1.0), X[:6])
            for row, p in zip(X[:6], phi):
                worst_brute = max(worst_brute, float(np.abs(p - _brute_shapley(tree, row, m)).max()))
        d.update(local=f"{worst_local:.1e}", brute=f"{worst_brute:.1e}")
        assert worst_local < 1e-9
        assert worst_brute < 1e-9


# 7 -------------------------------------------------------------------------


def test_07_metrics_and_selectivity():
    with criterion(7, "metric hand vectors exact; selectivity 1110.8 to 1e-6") as d:
        m = metrics([1, 2, 3], [2, 2, 2])
        assert m.r2 == 0.0
        assert m.mae == pytest.approx(2 / 3, rel=1e-15) and m.mse == pytest.approx(2 / 3, rel=1e-15)
        s, _ = selectivity([10.0, 30.0], [0.0003, 0.9997])
        hand = (10.0 / 0.0003) / (30.0 / 0.9997)
        d.update(S=f"{s:.4f}")
        assert abs(s / hand - 1) < 1e-6
        assert round(s, 1) == 1110.8


# 8 -------------------------------------------------------------------------


def test_08_nested_feature_sets():
    with criterion(8, "median test R2 non-decreasing over nested feature sets, 5 seeds") as d:
        scores = [[], [], []]
        for seed in range(5):
            ds, blocks = three_block_dataset(500, seed=seed)
            tr, te = ds.split(0.2, seed)
            for i in range(3):
                cols = [c for b in blocks[:i + 1] for c in b]
                model = train("boosted", tr.columns(cols), seed=seed)
                scores[i].append(metrics(te.y, model.predict(te.columns(cols).X)).r2)
        med = [statistics.median(s) for s in scores]
        d.update(median_r2=" <= ".join(f"{v:.3f}" for v in med))
        assert med[0] <= med[1] <= med[2]


# 9 -------------------------------------------------------------------------


def _bits(s):
    return set(maccs_subset(perceive_bonds(s)).on)


def test_09_fingerprints():
    with criterion(9, "fingerprint fixtures set the documented bits; 2x2x2 invariance") as d:
        assert _bits(pyridine()) == {45, 75, 100, 158, 161, 162, 163}
        assert _bits(benzene()) == {100, 162, 163}
        la = _bits(in_box(("La", "O", "O"), [[0, 0, 0], [2.1, 0, 0], [-2.1, 0, 0]]))
        zn = _bits(in_box(("Zn", "O", "O"), [[0, 0, 0], [2.1, 0, 0], [-2.1, 0, 0]]))
        assert 6 in la and 12 not in la and 12 in zn and 6 not in zn
        fixtures = [paddlewheel(), cubic(8.0, pyridine().symbols, pyridine().cartesian / 8.0 % 1.0)]
        fixtures += [read_cif(p) for p in sorted(TOY.glob("*.cif"))]
        for s in fixtures:
            assert _bits(s.replicated((2, 2, 2))) == _bits(s)
        d.update(structures=len(fixtures))


# 10 ------------------------------------------------------------------------


@pytest.mark.slow
def test_10_end_to_end_determinism(tmp_path):
    with criterion(10, "toy-corpus screen twice: byte-identical CSVs, rows + failures = inputs, < 10 min") as d:
        cfg_path = elements.data_path("toy_config.txt")
        t0 = time.perf_counter()
        runs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = screen(load_config(cfg_path, input_dir=str(TOY), output_dir=str(out)))
            runs.append((res, (out / "descriptors.csv").read_bytes()))
        elapsed = time.perf_counter() - t0
        n_in = len(list(TOY.glob("*.cif")))
        d.update(rows=len(runs[0][0].table), failures=len(runs[0][0].failures), seconds=f"{elapsed:.0f}")
        assert runs[0][1] == runs[1][1]
        for res, _ in runs:
            assert res.n_inputs == n_in == 3
            assert len(res.table) + len(res.failures) == n_in
        assert elapsed < 600.0
