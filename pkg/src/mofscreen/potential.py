"""Force-field data, Lennard-Jones and Ewald energies, and guest energy bookkeeping.

All energies are E/k_B in kelvin.  Guest-framework and guest-guest LJ use
Lorentz-Berthelot mixing, truncated at the cutoff without shift or tail
correction.  Electrostatics use a standard Ewald split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np
from scipy.special import erfc, erf

from .constants import COULOMB_K
from .elements import data_path
from .structio import Supercell, CrystalStructure, perpendicular_widths

OVERLAP_DISTANCE = 0.1
TIP3P_CANONICAL_ROH = 0.9572


class MissingElement(KeyError):
    def __init__(self, symbol):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self):
        return f"no framework LJ parameters for element {self.symbol!r}"


class NonNeutralSystem(ValueError):
    pass


class ForceFieldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LjSite:
    label: str
    epsilon: float   # K
    sigma: float     # A
    charge: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0 or self.sigma <= 0:
            raise ValueError(f"invalid LJ site {self}")


@dataclass(frozen=True, eq=False)
class GuestModel:
    """Rigid adsorbate; ``coords`` are body-frame site positions (A)."""

    name: str
    sites: tuple
    coords: np.ndarray
    mole_fraction: float = 1.0
    molweight: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1, 3)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if len(c) != len(self.sites):
            raise ValueError(f"{self.name}: {len(self.sites)} sites but {len(c)} coordinates")
        if abs(sum(s.charge for s in self.sites)) > 1e-8:
            raise NonNeutralSystem(f"guest {self.name} carries net charge")

    @property
    def epsilons(self):
        return np.array([s.epsilon for s in self.sites])

    @property
    def sigmas(self):
        return np.array([s.sigma for s in self.sites])

    @property
    def charges(self):
        return np.array([s.charge for s in self.sites])

    @property
    def is_charged(self) -> bool:
        return any(s.charge != 0.0 for s in self.sites)

    @property
    def is_rotatable(self) -> bool:
        return len(self.sites) > 1

    def with_mole_fraction(self, y: float) -> "GuestModel":
        return replace(self, mole_fraction=y)


@dataclass
class ForceField:
    framework_lj: dict = field(default_factory=dict)   # element -> (eps K, sigma A)
    guests: dict = field(default_factory=dict)         # name -> GuestModel
    comments: dict = field(default_factory=dict)

    def guest(self, name: str) -> GuestModel:
        return self.guests[name]


def parse_forcefield(text: str) -> ForceField:
    """Parse the sectioned force-field format.

    ``[framework_lj]`` holds ``element eps sigma`` rows; each ``[guest NAME]``
    holds ``label x y z eps sigma q`` site rows plus ``molefraction`` and
    ``molweight`` keys.
    """
    ff = ForceField()
    section = None
    guest = None

    def flush():
        if guest is not None:
            sites, coords = guest["sites"], guest["coords"]
            ff.guests[guest["name"]] = GuestModel(
                guest["name"], tuple(sites), np.array(coords),
                guest.get("molefraction", 1.0), guest.get("molweight", 0.0))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            flush()
            guest = None
            head = line.strip("[]").split()
            if head == ["framework_lj"]:
                section = "framework"
            elif len(head) == 2 and head[0] == "guest":
                section = "guest"
                guest = {"name": head[1], "sites": [], "coords": []}
            else:
                raise ForceFieldFormatError(f"line {lineno}: unknown section {line}")
            continue
        tok = line.split()
        try:
            if section == "framework":
                ff.framework_lj[tok[0]] = (float(tok[1]), float(tok[2]))
            elif section == "guest":
                if tok[0] in ("molefraction", "molweight"):
                    guest[tok[0]] = float(tok[1])
                else:
                    label, x, y, z, eps, sig, q = tok
                    guest["sites"].append(LjSite(label, float(eps), float(sig), float(q)))
                    guest["coords"].append((float(x), float(y), float(z)))
            else:
                raise ForceFieldFormatError(f"line {lineno}: data outside a section")
        except (ValueError, IndexError):
            raise ForceFieldFormatError(f"line {lineno}: cannot parse {raw!r}") from None
    flush()
    return ff


def format_forcefield(ff: ForceField) -> str:
    out = ["[framework_lj]"]
    for el, (eps, sig) in ff.framework_lj.items():
        out.append(f"{el} {eps!r} {sig!r}")
    for name, g in ff.guests.items():
        out += ["", f"[guest {name}]", f"molefraction {g.mole_fraction!r}", f"molweight {g.molweight!r}"]
        for s, (x, y, z) in zip(g.sites, g.coords):
            out.append(f"{s.label} {float(x)!r} {float(y)!r} {float(z)!r} {s.epsilon!r} {s.sigma!r} {s.charge!r}")
    return "\n".join(out) + "\n"


def _canonical_water(g: GuestModel) -> GuestModel:
    coords = np.array(g.coords)
    o = next(i for i, s in enumerate(g.sites) if s.label.upper().startswith("O"))
    out = coords.copy()
    for i in range(len(coords)):
        if i != o:
            v = coords[i] - coords[o]
            out[i] = coords[o] + v * (TIP3P_CANONICAL_ROH / np.linalg.norm(v))
    return replace(g, coords=out)


def load_forcefield(path: str | Path | None = None, tip3p_canonical: bool = False) -> ForceField:
    path = Path(path) if path else data_path("forcefield.def")
    ff = parse_forcefield(path.read_text())
    if tip3p_canonical and "H2O" in ff.guests:
        ff.guests["H2O"] = _canonical_water(ff.guests["H2O"])
    return ff


def assign_framework_lj(s: CrystalStructure | Supercell, ff: ForceField) -> list[LjSite]:
    sites = []
    charges = s.charges
    labels = getattr(s, "labels", None) or s.symbols
    for sym, q, lab in zip(s.symbols, charges, labels):
        if sym not in ff.framework_lj:
            raise MissingElement(sym)
        eps, sig = ff.framework_lj[sym]
        sites.append(LjSite(lab, eps, sig, float(q)))
    return sites


def mix(eps_i, sig_i, eps_j, sig_j):
    """Lorentz-Berthelot."""
    return np.sqrt(np.multiply(eps_i, eps_j)), 0.5 * np.add(sig_i, sig_j)


def lj_pair(eps_i, sig_i, eps_j, sig_j, r, cutoff=12.0):
    eps, sig = mix(eps_i, sig_i, eps_j, sig_j)
    r = np.asarray(r, dtype=float)
    sr6 = (sig / r) ** 6
    e = 4.0 * eps * (sr6 * sr6 - sr6)
    e = np.where(r < cutoff, e, 0.0)
    return float(e) if e.ndim == 0 else e


def _lj_r2(eps, sig, r2):
    s2 = sig * sig / r2
    s6 = s2 * s2 * s2
    return 4.0 * eps * (s6 * s6 - s6)


@dataclass
class EnergyBreakdown:
    lj_guest_framework: float = 0.0
    lj_guest_guest: float = 0.0
    ewald_real: float = 0.0
    ewald_reciprocal: float = 0.0
    ewald_self_and_exclusion: float = 0.0

    @property
    def total(self) -> float:
        return (self.lj_guest_framework + self.lj_guest_guest + self.ewald_real
                + self.ewald_reciprocal + self.ewald_self_and_exclusion)

    @property
    def electrostatic(self) -> float:
        return self.ewald_real + self.ewald_reciprocal + self.ewald_self_and_exclusion

    def __add__(self, other):
        return EnergyBreakdown(*(a + b for a, b in zip(self._parts(), other._parts())))

    def __sub__(self, other):
        return EnergyBreakdown(*(a - b for a, b in zip(self._parts(), other._parts())))

    def _parts(self):
        return (self.lj_guest_framework, self.lj_guest_guest, self.ewald_real,
                self.ewald_reciprocal, self.ewald_self_and_exclusion)

    @classmethod
    def overlap(cls):
        return cls(lj_guest_framework=math.inf)


# ---------------------------------------------------------------------- Ewald

def ewald_parameters(matrix, cutoff: float = 12.0, precision: float = 1e-6):
    """(alpha, kmax) for a target relative precision, given a real-space cutoff."""
    tol = math.sqrt(-math.log(precision))
    alpha = tol / cutoff
    kcut = 2.0 * alpha * tol
    lengths = np.linalg.norm(matrix, axis=1)
    kmax = tuple(int(math.ceil(kcut * L / (2.0 * math.pi))) for L in lengths)
    return alpha, kmax


class ReciprocalSpace:
    """Half-space k-vectors and prefactors for the reciprocal Ewald sum."""

    def __init__(self, matrix, alpha: float, kmax, kcut: float | None = None):
        matrix = np.asarray(matrix, dtype=float)
        self.volume = abs(np.linalg.det(matrix))
        self.inverse = np.linalg.inv(matrix)
        recip = 2.0 * np.pi * self.inverse.T
        kx, ky, kz = kmax
        self.kmax = (kx, ky, kz)
        n = np.array([v for v in product(range(0, kx + 1), range(-ky, ky + 1), range(-kz, kz + 1))
                      if v > (0, 0, 0)], dtype=int).reshape(-1, 3)
        k = n @ recip
        k2 = np.einsum("ij,ij->i", k, k)
        if kcut is not None:
            keep = k2 <= kcut * kcut
            n, k, k2 = n[keep], k[keep], k2[keep]
        self.kvecs = k
        # index of each k component in the per-axis phase tables
        self._idx = n + np.array(self.kmax)
        # half-space sum doubles every term
        self.pref = COULOMB_K * 4.0 * np.pi / self.volume * np.exp(-k2 / (4.0 * alpha * alpha)) / k2

    def structure_factor(self, positions, charges, chunk: int = 64) -> np.ndarray:
        """S(k) = sum_j q_j exp(i k.r_j), built from separable per-axis phase tables."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        charges = np.asarray(charges, dtype=float)
        out = np.zeros(len(self.kvecs), dtype=complex)
        if len(positions) == 0:
            return out
        frac = positions @ self.inverse
        for start in range(0, len(frac), chunk):
            f = frac[start:start + chunk]
            tabs = [np.exp(2j * np.pi * f[:, d, None] * np.arange(-m, m + 1)) for d, m in enumerate(self.kmax)]
            e = tabs[0][:, self._idx[:, 0]] * tabs[1][:, self._idx[:, 1]]
            e *= tabs[2][:, self._idx[:, 2]]
            out += charges[start:start + chunk] @ e
        return out

    def energy(self, sfac) -> float:
        return float(np.dot(self.pref, sfac.real ** 2 + sfac.imag ** 2))


def _image_shifts(matrix, reach: float):
    widths = perpendicular_widths(matrix)
    n = [int(math.ceil(reach / w)) + 1 for w in widths]
    return np.array(list(product(*(range(-k, k + 1) for k in n))), dtype=float) @ matrix


def ewald_energy(positions, charges, matrix, alpha: float, kmax, cutoff: float,
                 molecule_ids=None, tolerance: float = 1e-3) -> EnergyBreakdown:
    """Full Ewald energy of a periodic charge set (lattice sum of all images).

    Pairs sharing a ``molecule_ids`` value are excluded in the primary image
    and corrected with the erf term.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    q = np.asarray(charges, dtype=float)
    if abs(q.sum()) > tolerance:
        raise NonNeutralSystem(f"net charge {q.sum():.4g} e")
    if not np.any(q):
        return EnergyBreakdown()
    matrix = np.asarray(matrix, dtype=float)
    mol = np.arange(len(q)) if molecule_ids is None else np.asarray(molecule_ids)
    rs = ReciprocalSpace(matrix, alpha, kmax)
    e_recip = rs.energy(rs.structure_factor(pos, q))

    diff = pos[:, None, :] - pos[None, :, :]
    qq = q[:, None] * q[None, :]
    same = mol[:, None] == mol[None, :]
    e_real = 0.0
    for shift in _image_shifts(matrix, cutoff):
        r = np.linalg.norm(diff + shift, axis=2)
        primary = not np.any(shift)
        mask = r < cutoff
        if primary:
            mask &= ~same
        rr = np.where(mask, r, 1.0)
        e_real += 0.5 * np.sum(np.where(mask, qq * erfc(alpha * rr) / rr, 0.0))
    e_real *= COULOMB_K

    e_self = -COULOMB_K * alpha / math.sqrt(math.pi) * float(np.sum(q * q))
    iu = np.triu_indices(len(q), 1)
    pair_same = same[iu]
    e_excl = 0.0
    if np.any(pair_same):
        r = np.linalg.norm(diff[iu][pair_same], axis=1)
        e_excl = -COULOMB_K * float(np.sum(qq[iu][pair_same] * erf(alpha * r) / r))
    return EnergyBreakdown(ewald_real=e_real, ewald_reciprocal=e_recip,
                           ewald_self_and_exclusion=e_self + e_excl)


# ------------------------------------------------------------------ cell list

class CellList:
    """Static bins over framework atoms; a query returns atoms in the 27 surrounding bins.

    Dimensions with fewer than three bins of width >= cutoff collapse to a
    single bin, so queries there return every atom along that direction.
    """

    def __init__(self, positions, matrix, cutoff: float):
        self.matrix = np.asarray(matrix, dtype=float)
        self.inverse = np.linalg.inv(self.matrix)
        widths = perpendicular_widths(self.matrix)
        nb = np.floor(widths / cutoff).astype(int)
        nb[nb < 3] = 1
        self.nbins = nb
        frac = np.asarray(positions) @ self.inverse
        frac -= np.floor(frac)
        idx = np.minimum((frac * nb).astype(int), nb - 1)
        flat = np.ravel_multi_index(idx.T, nb) if len(idx) else np.zeros(0, int)
        members = [np.flatnonzero(flat == b) for b in range(int(np.prod(nb)))]
        self.candidates = []
        for b in range(int(np.prod(nb))):
            ijk = np.unravel_index(b, nb)
            neigh = set()
            for off in product(*[(-1, 0, 1) if n >= 3 else (0,) for n in nb]):
                nb_idx = tuple((i + o) % n for i, o, n in zip(ijk, off, nb))
                neigh.add(int(np.ravel_multi_index(nb_idx, nb)))
            self.candidates.append(np.sort(np.concatenate([members[k] for k in sorted(neigh)]))
                                   if neigh else np.zeros(0, int))

    def bin_of(self, points) -> np.ndarray:
        f = np.asarray(points) @ self.inverse
        f -= np.floor(f)
        idx = np.minimum((f * self.nbins).astype(int), self.nbins - 1)
        return np.ravel_multi_index(idx.T, self.nbins)

    def query(self, point) -> np.ndarray:
        return self.candidates[int(self.bin_of(np.asarray(point).reshape(1, 3))[0])]


# ------------------------------------------------------------------ framework

class Framework:
    """Rigid framework prepared for energy evaluation on a supercell."""

    def __init__(self, supercell: Supercell, ff: ForceField, cutoff: float = 12.0,
                 use_charges: bool = False, ewald_precision: float = 1e-6,
                 charge_tolerance: float = 1e-3):
        self.supercell = supercell
        self.cutoff = cutoff
        self.matrix = np.asarray(supercell.matrix, dtype=float)
        self.inverse = np.linalg.inv(self.matrix)
        self.volume = supercell.volume
        self.positions = np.asarray(supercell.cartesian, dtype=float)
        sites = assign_framework_lj(supercell, ff) if len(supercell) else []
        self.eps = np.array([s.epsilon for s in sites])
        self.sig = np.array([s.sigma for s in sites])
        q = np.asarray(supercell.charges, dtype=float) if use_charges else np.zeros(len(sites))
        if use_charges and abs(q.sum()) > charge_tolerance:
            raise NonNeutralSystem(f"framework net charge {q.sum():.4g} e")
        self.charges = q
        self.charged = bool(np.any(q))
        self.charged_idx = np.flatnonzero(q)
        self.cells = CellList(self.positions, self.matrix, cutoff)
        self.alpha, self.kmax = ewald_parameters(self.matrix, cutoff, ewald_precision)
        self._recip = None
        self._sfac = None

    @property
    def recip(self) -> ReciprocalSpace:
        if self._recip is None:
            tol = math.sqrt(-math.log(1e-6))
            self._recip = ReciprocalSpace(self.matrix, self.alpha, self.kmax,
                                          kcut=2.0 * self.alpha * tol)
        return self._recip

    @property
    def structure_factor(self) -> np.ndarray:
        if self._sfac is None:
            self._sfac = self.recip.structure_factor(self.positions[self.charged_idx],
                                                     self.charges[self.charged_idx])
        return self._sfac

    @property
    def mass(self) -> float:
        return self.supercell.mass

    def neighbors(self, points) -> list:
        """Candidate framework atoms (cell-list superset of the cutoff sphere) per point."""
        return [self.cells.query(p) for p in np.atleast_2d(points)]

    def min_image(self, delta):
        f = delta @ self.inverse
        f -= np.rint(f)
        return f @ self.matrix

    def batch_energy(self, g: GuestModel, positions, chunk: int = 256) -> np.ndarray:
        """Guest-framework energies of many trial placements, shape (B, sites, 3) -> (B,).

        Overlapping placements get +inf.  Electrostatics only when the framework
        carries charges.
        """
        positions = np.asarray(positions, dtype=float)
        nb = len(positions)
        out = np.zeros(nb)
        if len(self.positions) == 0:
            return out
        eps_m, sig_m = self.mixed(g)
        rc2 = self.cutoff ** 2
        q = g.charges
        do_coul = self.charged and g.is_charged
        for start in range(0, nb, chunk):
            pos = positions[start:start + chunk]
            e = np.zeros(len(pos))
            bad = np.zeros(len(pos), dtype=bool)
            for s in range(pos.shape[1]):
                want_lj = g.sites[s].epsilon > 0
                want_q = do_coul and q[s] != 0
                d = self.positions[None, :, :] - pos[:, s, None, :]
                f = d @ self.inverse
                f -= np.rint(f)
                d = f @ self.matrix
                r2 = np.einsum("bnk,bnk->bn", d, d)
                bad |= (r2 < OVERLAP_DISTANCE ** 2).any(axis=1)
                inside = r2 < rc2
                if want_lj:
                    r2s = np.where(inside, r2, 1.0)
                    lj = _lj_r2(eps_m[s][None, :], sig_m[s][None, :], r2s)
                    e += np.where(inside, lj, 0.0).sum(axis=1)
                if want_q:
                    r = np.sqrt(np.where(inside, r2, 1.0))
                    term = np.where(inside, self.charges[None, :] * erfc(self.alpha * r) / r, 0.0)
                    e += COULOMB_K * q[s] * term.sum(axis=1)
            if do_coul:
                rs = self.recip
                phase = np.einsum("bsk,qk->bsq", pos, rs.kvecs)
                s_new = np.einsum("s,bsq->bq", q, np.exp(1j * phase))
                sf = self.structure_factor
                e += (2.0 * (s_new.real * sf.real + s_new.imag * sf.imag)) @ rs.pref
            e[bad] = np.inf
            out[start:start + chunk] = e
        return out

    def mixed(self, g: GuestModel):
        """Per guest site: mixed (eps, sig) arrays against every framework atom."""
        eps = np.sqrt(g.epsilons[:, None] * self.eps[None, :])
        sig = 0.5 * (g.sigmas[:, None] + self.sig[None, :])
        return eps, sig


@dataclass
class Molecule:
    species: int
    positions: np.ndarray
    center: np.ndarray = None

    def __post_init__(self):
        if self.center is None:
            self.center = self.positions.mean(axis=0)


class Configuration:
    """Framework plus the current set of adsorbed rigid guests.

    Keeps the guest reciprocal-space structure factor and flattened
    site arrays in sync with the molecule list.
    """

    def __init__(self, framework: Framework, species: list[GuestModel]):
        self.framework = framework
        self.species = list(species)
        self.molecules: list[Molecule] = []
        self.coulomb = framework.charged or any(g.is_charged for g in species)
        self._mixed = [framework.mixed(g) for g in species]
        n = len(species)
        self._gg_eps = [[np.sqrt(species[a].epsilons[:, None] * species[b].epsilons[None, :])
                         for b in range(n)] for a in range(n)]
        self._gg_sig = [[0.5 * (species[a].sigmas[:, None] + species[b].sigmas[None, :])
                         for b in range(n)] for a in range(n)]
        self._intra = [self._intramolecular(g) for g in species]
        # species that interact with nothing: no LJ well and no charge
        self._inert = [not np.any(g.epsilons > 0) and not g.is_charged for g in species]
        self.guest_sfac = (np.zeros(len(framework.recip.kvecs), dtype=complex)
                           if self.coulomb else None)
        self._sfac_cache = []
        self._flat = None

    # -- bookkeeping
    def _intramolecular(self, g: GuestModel) -> float:
        if not self.coulomb or not g.is_charged:
            return 0.0
        alpha = self.framework.alpha
        q = g.charges
        e = -COULOMB_K * alpha / math.sqrt(math.pi) * float(np.sum(q * q))
        for i in range(len(q)):
            for j in range(i + 1, len(q)):
                r = float(np.linalg.norm(g.coords[i] - g.coords[j]))
                e -= COULOMB_K * q[i] * q[j] * math.erf(alpha * r) / r
        return e

    def counts(self) -> np.ndarray:
        c = np.zeros(len(self.species), dtype=int)
        for m in self.molecules:
            c[m.species] += 1
        return c

    def _site_sfac(self, species: int, positions) -> np.ndarray | None:
        g = self.species[species]
        if not self.coulomb or not g.is_charged:
            return None
        return self.framework.recip.structure_factor(positions, g.charges)

    def flat(self):
        """Concatenated guest sites: positions, species, site index, molecule index."""
        if self._flat is None:
            if self.molecules:
                pos = np.concatenate([m.positions for m in self.molecules])
                spec = np.concatenate([np.full(len(m.positions), m.species) for m in self.molecules])
                site = np.concatenate([np.arange(len(m.positions)) for m in self.molecules])
                mol = np.concatenate([np.full(len(m.positions), k) for k, m in enumerate(self.molecules)])
                q = np.concatenate([self.species[m.species].charges for m in self.molecules])
            else:
                pos = np.zeros((0, 3))
                spec = site = mol = np.zeros(0, int)
                q = np.zeros(0)
            self._flat = (pos, spec, site, mol, q)
        return self._flat

    def add(self, species: int, positions, sfac=None, center=None):
        self.molecules.append(Molecule(species, np.asarray(positions, dtype=float), center))
        if sfac is None:
            sfac = self._site_sfac(species, positions)
        self._sfac_cache.append(sfac)
        if sfac is not None:
            self.guest_sfac += sfac
        self._flat = None

    def remove(self, index: int):
        m = self.molecules.pop(index)
        sfac = self._sfac_cache.pop(index)
        if sfac is not None:
            self.guest_sfac -= sfac
        self._flat = None
        return m

    def replace(self, index: int, species: int, positions, sfac=None, center=None):
        old = self._sfac_cache[index]
        if old is not None:
            self.guest_sfac -= old
        if sfac is None:
            sfac = self._site_sfac(species, positions)
        if sfac is not None:
            self.guest_sfac += sfac
        self._sfac_cache[index] = sfac
        self.molecules[index] = Molecule(species, np.asarray(positions, dtype=float), center)
        self._flat = None

    # -- energies
    def framework_energy(self, species: int, positions) -> EnergyBreakdown:
        """Guest-framework interaction only (no guest-guest, no self terms)."""
        fw = self.framework
        g = self.species[species]
        eps_m, sig_m = self._mixed[species]
        rc2 = fw.cutoff ** 2
        lj = 0.0
        real = 0.0
        for s, (p, cand) in enumerate(zip(positions, fw.neighbors(positions))):
            if len(cand) == 0:
                continue
            d = fw.min_image(fw.positions[cand] - p)
            r2 = np.einsum("ij,ij->i", d, d)
            if r2.min() < OVERLAP_DISTANCE ** 2:
                return EnergyBreakdown.overlap()
            m = r2 < rc2
            if g.sites[s].epsilon > 0.0:
                lj += float(np.sum(_lj_r2(eps_m[s, cand][m], sig_m[s, cand][m], r2[m])))
            if fw.charged and g.sites[s].charge != 0.0:
                qf = fw.charges[cand][m]
                r = np.sqrt(r2[m])
                real += COULOMB_K * g.sites[s].charge * float(np.sum(qf * erfc(fw.alpha * r) / r))
        recip = 0.0
        if fw.charged and g.is_charged:
            s_new = fw.recip.structure_factor(positions, g.charges)
            sf = fw.structure_factor
            recip = float(np.dot(fw.recip.pref, 2.0 * (sf.real * s_new.real + sf.imag * s_new.imag)))
        return EnergyBreakdown(lj_guest_framework=lj, ewald_real=real, ewald_reciprocal=recip)

    def molecule_energy(self, species: int, positions, exclude: int | None = None,
                        sfac=None) -> EnergyBreakdown:
        """Interaction of a (trial) molecule with the framework and all other guests.

        ``exclude`` names the molecule being moved or deleted, which is left out
        of the environment.  Returns an overlap sentinel (total = +inf) when any
        pair is closer than 0.1 A.
        """
        if self._inert[species]:
            return EnergyBreakdown()
        fw = self.framework
        g = self.species[species]
        positions = np.asarray(positions, dtype=float)
        e = self.framework_energy(species, positions)
        if math.isinf(e.lj_guest_framework):
            return e
        if fw.charged and g.is_charged:
            # reciprocal handled below on the total structure factor
            e.ewald_reciprocal = 0.0
        pos, spec, site, mol, q = self.flat()
        rc2 = fw.cutoff ** 2
        if len(pos):
            keep = mol != exclude if exclude is not None else slice(None)
            pos_o, spec_o, site_o, q_o = pos[keep], spec[keep], site[keep], q[keep]
            if len(pos_o):
                for s, p in enumerate(positions):
                    d = fw.min_image(pos_o - p)
                    r2 = np.einsum("ij,ij->i", d, d)
                    if r2.min() < OVERLAP_DISTANCE ** 2:
                        return EnergyBreakdown.overlap()
                    m = r2 < rc2
                    if not np.any(m):
                        continue
                    sp, st, rr2 = spec_o[m], site_o[m], r2[m]
                    if g.sites[s].epsilon > 0.0:
                        eps = np.empty(len(sp))
                        sig = np.empty(len(sp))
                        for b in np.unique(sp):
                            sel = sp == b
                            eps[sel] = self._gg_eps[species][b][s, st[sel]]
                            sig[sel] = self._gg_sig[species][b][s, st[sel]]
                        nz = eps > 0
                        e.lj_guest_guest += float(np.sum(_lj_r2(eps[nz], sig[nz], rr2[nz])))
                    if self.coulomb and g.sites[s].charge != 0.0:
                        qm = q_o[m]
                        nzq = qm != 0
                        r = np.sqrt(rr2[nzq])
                        e.ewald_real += COULOMB_K * g.sites[s].charge * float(
                            np.sum(qm[nzq] * erfc(fw.alpha * r) / r))
        if self.coulomb and g.is_charged:
            rs = fw.recip
            if sfac is None:
                sfac = rs.structure_factor(positions, g.charges)
            rest = self.guest_sfac.copy()
            if fw.charged:
                rest += fw.structure_factor
            if exclude is not None and self._sfac_cache[exclude] is not None:
                rest -= self._sfac_cache[exclude]
            tot = rest + sfac
            e.ewald_reciprocal = float(np.dot(rs.pref, (tot.real ** 2 + tot.imag ** 2)
                                              - (rest.real ** 2 + rest.imag ** 2)))
            e.ewald_self_and_exclusion = self._intra[species]
        return e

    def total_energy(self) -> EnergyBreakdown:
        """From-scratch energy of all guests (framework-framework excluded)."""
        fw = self.framework
        total = EnergyBreakdown()
        for m in self.molecules:
            e = self.framework_energy(m.species, m.positions)
            total.lj_guest_framework += e.lj_guest_framework
            total.ewald_real += e.ewald_real
        pos, spec, site, mol, q = self.flat()
        rc2 = fw.cutoff ** 2
        n = len(pos)
        for i in range(n):
            j = np.arange(i + 1, n)
            j = j[mol[j] != mol[i]]
            if len(j) == 0:
                continue
            d = fw.min_image(pos[j] - pos[i])
            r2 = np.einsum("ij,ij->i", d, d)
            m = r2 < rc2
            for jj, rr2 in zip(j[m], r2[m]):
                ei = self.species[spec[i]].sites[site[i]]
                ej = self.species[spec[jj]].sites[site[jj]]
                if ei.epsilon > 0 and ej.epsilon > 0:
                    total.lj_guest_guest += float(_lj_r2(math.sqrt(ei.epsilon * ej.epsilon),
                                                         0.5 * (ei.sigma + ej.sigma), rr2))
                if self.coulomb and q[i] != 0 and q[jj] != 0:
                    r = math.sqrt(rr2)
                    total.ewald_real += COULOMB_K * q[i] * q[jj] * math.erfc(fw.alpha * r) / r
        if self.coulomb:
            rs = fw.recip
            sg = rs.structure_factor(pos, q) if n else np.zeros(len(rs.kvecs), complex)
            base = fw.structure_factor if fw.charged else np.zeros_like(sg)
            tot = base + sg
            total.ewald_reciprocal = rs.energy(tot) - rs.energy(base)
            total.ewald_self_and_exclusion = sum(self._intra[m.species] for m in self.molecules)
        return total


def guest_insertion_energy(state: Configuration, species: int, positions,
                           exclude: int | None = None) -> EnergyBreakdown:
    """Energy change for placing a guest at ``positions`` into ``state``."""
    return state.molecule_energy(species, positions, exclude=exclude)
