"""Pore geometry on a periodic distance grid: LCD, PLD, surface area, density, pore volume."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import elements
from .constants import AMU_G, A3_CM3
from .structio import CrystalStructure, perpendicular_widths

N2_PROBE_RADIUS = 3.64 / 2.0
I2_KINETIC_DIAMETER = 3.34


class GridTooLarge(ValueError):
    pass


class NoFramework(ValueError):
    """The cell has no atoms, so cavity sizes are unbounded."""


class ZeroMass(ValueError):
    pass


def _site_radii(s: CrystalStructure, radii: dict | None) -> np.ndarray:
    radii = radii or elements.default_geometry_radii()
    try:
        return np.array([radii[sym] for sym in s.symbols], dtype=float)
    except KeyError as exc:
        raise elements_missing(exc.args[0]) from None


def elements_missing(symbol):
    return KeyError(f"no geometry radius for element {symbol!r}")


class _PeriodicAtoms:
    """Atom images around the unit cell, grouped by radius, for nearest-surface queries."""

    def __init__(self, cart, radii, matrix, reach: float):
        self.matrix = matrix
        widths = perpendicular_widths(matrix)
        n = [int(math.ceil(reach / w)) + 1 for w in widths]
        shifts = np.array(list(product(*(range(-k, k + 1) for k in n))), dtype=float) @ matrix
        self.groups = []
        for r in np.unique(radii):
            pts = (cart[radii == r][None, :, :] + shifts[:, None, :]).reshape(-1, 3)
            self.groups.append((float(r), cKDTree(pts)))

    def surface_distance(self, points) -> np.ndarray:
        best = np.full(len(points), np.inf)
        for r, tree in self.groups:
            d, _ = tree.query(points, k=1)
            np.minimum(best, d - r, out=best)
        return best


@dataclass(eq=False)
class DistanceGrid:
    spacing: float
    dims: tuple
    values: np.ndarray = field(repr=False)   # signed distance to nearest atom surface
    matrix: np.ndarray = field(repr=False)
    atoms: object = field(repr=False, default=None)

    @property
    def voxel_spacing(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=1) / np.array(self.dims)

    def points(self, idx) -> np.ndarray:
        return (np.asarray(idx, dtype=float) / np.array(self.dims)) @ self.matrix

    def surface_distance(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.atoms is None:
            return np.full(len(points), np.inf)
        return self.atoms.surface_distance(points)


def build_distance_grid(s: CrystalStructure, spacing: float = 0.2, radii: dict | None = None,
                        voxel_budget: int = 200_000_000, chunk: int = 1_000_000) -> DistanceGrid:
    """Signed distance from each voxel to the nearest atom surface (periodic)."""
    if not 0.05 <= spacing <= 1.0:
        raise ValueError("grid spacing must lie in [0.05, 1.0] A")
    matrix = s.matrix
    dims = tuple(int(math.ceil(L / spacing)) for L in np.linalg.norm(matrix, axis=1))
    nvox = int(np.prod(dims))
    if nvox > voxel_budget:
        raise GridTooLarge(f"{nvox} voxels exceed the budget of {voxel_budget}")
    if len(s) == 0:
        return DistanceGrid(spacing, dims, np.full(dims, np.inf), matrix, None)
    cart = s.cartesian
    rad = _site_radii(s, radii)
    idx = np.indices(dims).reshape(3, -1).T

    def evaluate(atoms):
        vals = np.empty(nvox)
        for start in range(0, nvox, chunk):
            pts = (idx[start:start + chunk] / np.array(dims)) @ matrix
            vals[start:start + chunk] = atoms.surface_distance(pts)
        return vals

    atoms = _PeriodicAtoms(cart, rad, matrix, reach=0.0)
    vals = evaluate(atoms)
    # the nearest image may sit further out than one cell for sparse or skewed cells
    reach = float(vals.max() + rad.max())
    if np.any(reach > perpendicular_widths(matrix)):
        atoms = _PeriodicAtoms(cart, rad, matrix, reach=reach)
        vals = evaluate(atoms)
    return DistanceGrid(spacing, dims, vals.reshape(dims), matrix, atoms)


# ------------------------------------------------------------------------- LCD

_DIRECTIONS = np.array([v for v in product((-1, 0, 1), repeat=3) if v > (0, 0, 0)], dtype=float)
_DIRECTIONS /= np.linalg.norm(_DIRECTIONS, axis=1)[:, None]
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float, tol: float = 1e-6):
    c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def polish_maximum(g: DistanceGrid, start, radius: float, sweeps: int = 40):
    """Local golden-section line searches along the 13 lattice-neighbour directions."""
    x = np.asarray(start, dtype=float)
    best = float(g.surface_distance(x)[0])
    for _ in range(sweeps):
        before = best
        for u in _DIRECTIONS:
            t, val = _golden_max(lambda t: float(g.surface_distance(x + t * u)[0]), -radius, radius)
            if val > best:
                x, best = x + t * u, val
        if best - before < 1e-9:
            break
    return x, best


def largest_cavity_diameter(g: DistanceGrid, polish: bool = True) -> float:
    """Diameter of the largest sphere that fits anywhere in the void."""
    if not np.isfinite(g.values).any():
        raise NoFramework("no atoms in the cell")
    flat = int(np.argmax(g.values))
    best = float(g.values.flat[flat])
    if polish:
        start = g.points(np.unravel_index(flat, g.dims))
        _, val = polish_maximum(g, start, radius=float(g.voxel_spacing.max()))
        best = max(best, val)
    return 2.0 * best


# ------------------------------------------------------------------------- PLD

class _OffsetUnionFind:
    """Union-find over component labels, tracking the periodic image offset to the root."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.offset = [np.zeros(3, dtype=int) for _ in range(n)]
        self.winding = np.zeros(3, dtype=bool)

    def find(self, x):
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        total = np.zeros(3, dtype=int)
        for node in reversed(path):
            total = total + self.offset[node]
            self.offset[node] = total.copy()
            self.parent[node] = root
        return root

    def pos(self, x):
        root = self.find(x)
        return root, (self.offset[x] if x != root else np.zeros(3, dtype=int))

    def join(self, a, b, step):
        """Copy of ``b`` shifted by ``step`` touches ``a``."""
        ra, pa = self.pos(a)
        rb, pb = self.pos(b)
        want = pa + step
        if ra == rb:
            diff = want - pb
            self.winding |= diff != 0
            return
        self.parent[rb] = ra
        self.offset[rb] = want - pb


def percolation_directions(mask: np.ndarray) -> np.ndarray:
    """Which lattice directions a periodic voxel set spans (6-connectivity)."""
    labels, n = ndimage.label(mask)
    if n == 0:
        return np.zeros(3, dtype=bool)
    uf = _OffsetUnionFind(n + 1)
    for d in range(3):
        last = np.take(labels, -1, axis=d)
        first = np.take(labels, 0, axis=d)
        both = (last > 0) & (first > 0)
        if not both.any():
            continue
        pairs = np.unique(np.stack([last[both], first[both]], axis=1), axis=0)
        step = np.zeros(3, dtype=int)
        step[d] = 1
        for a, b in pairs:
            uf.join(int(a), int(b), step)
    return uf.winding.copy()


def _bottleneck(values, candidates, test) -> float:
    """Largest candidate threshold t with test(values >= t); candidates ascending."""
    lo, hi = 0, len(candidates) - 1
    if hi < 0 or not test(values >= candidates[0]):
        return 0.0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if test(values >= candidates[mid]):
            lo = mid
        else:
            hi = mid - 1
    return float(candidates[lo])


def pore_limiting_diameter(g: DistanceGrid, probe_radius: float = 0.0, direction: int | None = None) -> float:
    """Diameter of the largest sphere that percolates through the periodic void.

    Bisection over the sorted voxel values with periodic union-find
    connectivity; ``direction`` restricts percolation to one lattice axis,
    otherwise any axis counts.  Closed structures return 0.
    """
    vals = g.values
    finite = np.isfinite(vals)
    if not finite.any():
        raise NoFramework("no atoms in the cell")
    cand = np.unique(vals[finite & (vals > max(probe_radius, 0.0))])
    if direction is None:
        test = lambda m: bool(percolation_directions(m).any())
    else:
        test = lambda m: bool(percolation_directions(m)[direction])
    return 2.0 * _bottleneck(vals, cand, test)


def pore_limiting_diameters(g: DistanceGrid) -> tuple:
    """Per-axis PLD (a, b, c)."""
    return tuple(pore_limiting_diameter(g, direction=d) for d in range(3))


# ---------------------------------------------------------------- surface area

def accessible_surface_area(s: CrystalStructure, probe_radius: float = N2_PROBE_RADIUS,
                            samples_per_atom: int = 1000, radii: dict | None = None,
                            seed: int = 0, return_error: bool = False):
    """Probe-accessible surface area in m^2/g by Monte Carlo shell sampling.

    A point on atom i's probe-inflated shell is blocked when it lies strictly
    inside another atom's inflated sphere (periodic images included).  For
    coincident atoms of equal radius only the first one keeps its shell.
    """
    if probe_radius <= 0:
        raise ValueError("probe radius must be positive")
    if samples_per_atom < 100:
        raise ValueError("need at least 100 samples per atom")
    mass = s.mass
    if mass <= 0:
        raise ZeroMass(s.name)
    rad = _site_radii(s, radii) + probe_radius
    cart = s.cartesian
    matrix = s.matrix
    widths = perpendicular_widths(matrix)
    reach = 2.0 * rad.max()
    n = [int(math.ceil(reach / w)) + 1 for w in widths]
    shift_idx = np.array(list(product(*(range(-k, k + 1) for k in n))))
    shifts = shift_idx.astype(float) @ matrix
    nat = len(cart)
    img = (cart[None, :, :] + shifts[:, None, :]).reshape(-1, 3)
    img_atom = np.tile(np.arange(nat), len(shifts))
    img_primary = np.repeat(~shift_idx.any(axis=1), nat)
    tree = cKDTree(img)
    rng = np.random.Generator(np.random.PCG64(seed))
    area = 0.0
    var = 0.0
    for i in range(nat):
        R = rad[i]
        v = rng.normal(size=(samples_per_atom, 3))
        pts = cart[i] + R * v / np.linalg.norm(v, axis=1)[:, None]
        neigh = np.array(tree.query_ball_point(cart[i], R + rad.max()), dtype=int)
        j_atom = img_atom[neigh]
        drop_self = (j_atom == i) & img_primary[neigh]
        neigh, j_atom = neigh[~drop_self], j_atom[~drop_self]
        coincident = (np.linalg.norm(img[neigh] - cart[i], axis=1) < 1e-8) & (rad[j_atom] == R)
        if np.any(coincident & (j_atom < i) & img_primary[neigh]):
            continue
        neigh, j_atom = neigh[~coincident], j_atom[~coincident]
        if len(neigh):
            d = np.linalg.norm(pts[:, None, :] - img[neigh][None, :, :], axis=2)
            blocked = (d < rad[j_atom][None, :]).any(axis=1)
            frac = 1.0 - blocked.mean()
        else:
            frac = 1.0
        shell = 4.0 * math.pi * R * R
        area += shell * frac
        var += shell * shell * frac * (1.0 - frac) / samples_per_atom
    to_m2g = 1e-20 / (mass * AMU_G)
    if return_error:
        return area * to_m2g, math.sqrt(var) * to_m2g
    return area * to_m2g


# ------------------------------------------------------------- bulk quantities

def bulk_descriptors(s: CrystalStructure, phi: float) -> tuple[float, float]:
    """(density g/cm^3, pore volume cm^3/g) from the cell and a void fraction."""
    mass_g = s.mass * AMU_G
    if mass_g <= 0:
        raise ZeroMass(s.name)
    vol_cm3 = s.volume * A3_CM3
    return mass_g / vol_cm3, phi * vol_cm3 / mass_g


@dataclass
class StructuralDescriptors:
    pld: float
    lcd: float
    void_fraction: float
    surface_area: float
    pore_volume: float
    density: float

    def columns(self) -> dict:
        return {"PLD": self.pld, "LCD": self.lcd, "void_fraction": self.void_fraction,
                "surface_area": self.surface_area, "pore_volume": self.pore_volume,
                "density": self.density}


def structural_descriptors(s: CrystalStructure, void_fraction: float, spacing: float = 0.2,
                           radii: dict | None = None, samples_per_atom: int = 1000,
                           seed: int = 0) -> StructuralDescriptors:
    grid = build_distance_grid(s, spacing, radii)
    lcd = largest_cavity_diameter(grid)
    pld = min(pore_limiting_diameter(grid), lcd)
    sa = accessible_surface_area(s, samples_per_atom=samples_per_atom, radii=radii, seed=seed)
    rho, pv = bulk_descriptors(s, void_fraction)
    return StructuralDescriptors(pld, lcd, void_fraction, sa, pv, rho)
