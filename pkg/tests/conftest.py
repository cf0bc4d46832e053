import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mofscreen.potential import Framework, GuestModel, LjSite, load_forcefield
from mofscreen.structio import CrystalStructure, build_supercell

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def cubic(a, symbols=(), frac=None, name="fixture", charges=None):
    frac = np.zeros((0, 3)) if frac is None else np.asarray(frac, dtype=float)
    return CrystalStructure(name, (a, a, a), (90.0, 90.0, 90.0), tuple(symbols), frac, charges)


def point_guest(name="X", eps=0.0, sig=1.0, q=0.0, y=1.0, mw=4.0):
    return GuestModel(name, (LjSite(name, eps, sig, q),), np.zeros((1, 3)), y, mw)


def random_fixture(n=50, a=25.0, seed=0, symbols=("C", "O", "H", "N"), min_dist=2.0):
    """Random non-overlapping atoms in a cube."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        p = rng.random(3) * a
        ok = True
        for q in pts:
            d = p - q
            d -= a * np.rint(d / a)
            if np.linalg.norm(d) < min_dist:
                ok = False
                break
        if ok:
            pts.append(p)
    syms = [symbols[i % len(symbols)] for i in range(n)]
    return cubic(a, syms, np.array(pts) / a, name=f"random{seed}")


@pytest.fixture(scope="session")
def ff():
    return load_forcefield()


@pytest.fixture
def empty_box():
    return cubic(30.0)


def framework_of(s, ff, **kw):
    return Framework(build_supercell(s, kw.pop("cutoff", 12.0)), ff, **kw)


# ---------------------------------------------------------------- molecules

def in_box(symbols, cart, a=20.0, name="molecule"):
    """Molecule centred in a cubic box large enough to isolate it."""
    cart = np.asarray(cart, dtype=float)
    cart = cart - cart.mean(axis=0) + a / 2
    return cubic(a, symbols, cart / a, name=name)


def hexagon(radius=1.39, phase=0.0, center=(0.0, 0.0)):
    ang = phase + np.arange(6) * np.pi / 3
    return np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang), np.zeros(6)], -1)


def benzene():
    ring = hexagon()
    h = hexagon(1.39 + 1.09)
    return in_box(("C",) * 6 + ("H",) * 6, np.vstack([ring, h]), name="benzene")


def pyridine():
    ring = hexagon()
    h = hexagon(1.39 + 1.09)[1:]
    return in_box(("N",) + ("C",) * 5 + ("H",) * 5, np.vstack([ring, h]), name="pyridine")


def naphthalene():
    d = 1.40
    left = hexagon(d, np.pi / 6, (-d * np.sqrt(3) / 2, 0.0))
    right = hexagon(d, np.pi / 6, (d * np.sqrt(3) / 2, 0.0))
    pts = np.vstack([left, right])
    keep = []
    for p in pts:
        if not any(np.linalg.norm(p - q) < 0.1 for q in keep):
            keep.append(p)
    carbons = np.array(keep)
    hs = []
    for p in carbons:
        near = [q for q in carbons if 0.1 < np.linalg.norm(p - q) < 1.6]
        if len(near) == 2:
            out = p - np.mean(near, axis=0)
            hs.append(p + 1.09 * out / np.linalg.norm(out))
    return in_box(("C",) * len(carbons) + ("H",) * len(hs), np.vstack([carbons, hs]), name="naphthalene")


def methane():
    t = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3) * 1.09
    return in_box(("C",) + ("H",) * 4, np.vstack([[0, 0, 0], t]), name="methane")


def paddlewheel(metal="Cu"):
    """M2(HCOO)4 paddlewheel plus a separate M3(mu3-O) triangle."""
    sym, pts = [metal, metal], [[0, 0, 1.3], [0, 0, -1.3]]
    for u in ([1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]):
        u = np.array(u, float)
        sym += ["O", "O", "C", "H"]
        pts += [1.95 * u + [0, 0, 1.3], 1.95 * u - [0, 0, 1.3], 2.45 * u, 3.55 * u]
    centre = np.array([0.0, 0.0, 8.0])
    sym.append("O")
    pts.append(centre)
    for k in range(3):
        ang = 2 * np.pi * k / 3
        sym.append(metal)
        pts.append(centre + 1.95 * np.array([np.cos(ang), np.sin(ang), 0.0]))
    return in_box(tuple(sym), np.array(pts), a=24.0, name="paddlewheel")


# acceptance criteria report: one PASS/FAIL line per criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
