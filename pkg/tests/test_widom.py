import math

import numpy as np
import pytest
from scipy import integrate

from mofscreen.constants import R_GAS
from mofscreen.widom import (DegenerateAverage, chemical_descriptors, heat_of_adsorption,
                             helium_void_fraction, henry_coefficient, widom_sample)

from conftest import cubic, framework_of, point_guest


class HalfWall:
    """Synthetic system: infinite wall over half the box along x."""

    def __init__(self, a=20.0):
        self.matrix = np.eye(3) * a
        self.a = a

    def batch_energy(self, g, positions):
        x = positions[:, 0, 0] % self.a
        return np.where(x < self.a / 2, np.inf, 0.0)


class UniformWell:
    def __init__(self, depth_k):
        self.matrix = np.eye(3) * 20.0
        self.depth = depth_k

    def batch_energy(self, g, positions):
        return np.full(len(positions), -self.depth)


def test_empty_box_exact(ff, empty_box):
    fw = framework_of(empty_box, ff)
    for name in ("I2", "H2O"):
        smp = widom_sample(fw, ff.guests[name], 423.0, 20_000, seed=1)
        assert smp.w == 1.0
        assert smp.uw == 0.0
        assert heat_of_adsorption(smp.w, smp.uw, 423.0) == R_GAS * 423.0 / 1000.0


def test_rt_value():
    assert heat_of_adsorption(1.0, 0.0, 423.0) == pytest.approx(3.517, abs=1e-3)


def test_half_wall_fraction():
    smp = widom_sample(HalfWall(), point_guest(), 300.0, 40_000, seed=3)
    assert abs(smp.w - 0.5) < 3 * smp.w_err


def test_uniform_well_heat():
    depth = 10_000.0 / R_GAS            # -10 kJ/mol in K
    smp = widom_sample(UniformWell(depth), point_guest(), 423.0, 10_000, seed=0)
    q = heat_of_adsorption(smp.w, smp.uw, 423.0)
    assert q == pytest.approx(R_GAS * 423.0 / 1000.0 + 10.0, rel=1e-12)


def test_single_atom_quadrature(ff):
    """<W> against radial quadrature of exp(-beta U(r)) around one framework atom."""
    a, t = 30.0, 300.0
    fw = framework_of(cubic(a, ("C",), [[0.5, 0.5, 0.5]]), ff)
    g = point_guest("Ar", eps=120.0, sig=3.4)
    eps = math.sqrt(120.0 * ff.framework_lj["C"][0])
    sig = 0.5 * (3.4 + ff.framework_lj["C"][1])

    def f(r):
        if r < 0.1:
            return 0.0
        u = 4 * eps * ((sig / r) ** 12 - (sig / r) ** 6)
        return (math.exp(-u / t) - 1.0) * 4 * math.pi * r * r

    excess, _ = integrate.quad(f, 0.0, 12.0, points=[sig, 2 ** (1 / 6) * sig], limit=200)
    expected = 1.0 + excess / a ** 3
    smp = widom_sample(fw, g, t, 200_000, seed=2)
    assert smp.w == pytest.approx(expected, rel=0.01)


def test_henry_arithmetic():
    assert henry_coefficient(1.0, 423.0, 1000.0) == pytest.approx(2.844e-7, rel=1e-3)
    assert henry_coefficient(0.0, 423.0, 1000.0) == 0.0
    assert henry_coefficient(0.7, 423.0, 2000.0) == pytest.approx(0.5 * henry_coefficient(0.7, 423.0, 1000.0))
    with pytest.raises(ValueError):
        henry_coefficient(1.0, 423.0, 0.0)


def test_degenerate_average():
    with pytest.raises(DegenerateAverage):
        heat_of_adsorption(0.0, 0.0, 423.0)


def test_void_fraction_bounds(ff, empty_box):
    assert helium_void_fraction(framework_of(empty_box, ff), ff, n=10_000) == 1.0
    # 0.8 A grid of atoms: every helium insertion overlaps strongly
    pts = np.stack(np.meshgrid(*[np.arange(0, 1, 1 / 16)] * 3, indexing="ij"), -1).reshape(-1, 3)
    dense = framework_of(cubic(12.8, ("C",) * len(pts), pts), ff)
    smp = widom_sample(dense, ff.guests["He"], 298.0, 10_000, seed=0)
    assert smp.w >= 0.0
    assert smp.w <= 3 * smp.w_err + 1e-300


def test_n_versus_4n(ff):
    fw = framework_of(cubic(25.0, ("C", "O"), [[0.1, 0.1, 0.1], [0.6, 0.5, 0.4]]), ff)
    g = ff.guests["I2"]
    a = widom_sample(fw, g, 423.0, 20_000, seed=1)
    b = widom_sample(fw, g, 423.0, 80_000, seed=2)
    assert abs(a.w - b.w) < 3 * math.hypot(a.w_err, b.w_err)


def test_too_few_insertions(ff, empty_box):
    with pytest.raises(ValueError):
        widom_sample(framework_of(empty_box, ff), ff.guests["I2"], 423.0, 100)


def test_chemical_descriptors_columns(ff):
    fw = framework_of(cubic(25.0, ("C",), [[0, 0, 0]]), ff)
    d = chemical_descriptors(fw, ff, n=10_000, seed=3)
    cols = d.columns()
    assert set(cols) == {f"{s}_{k}" for s in ("I2", "H2O", "N2", "O2") for k in ("Henry", "heat")}
    assert all(np.isfinite(v) for v in cols.values())
