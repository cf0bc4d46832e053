"""Grand-canonical Monte Carlo of rigid guests in a rigid framework."""
from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import KB, R_GAS, BAR, STP_MOLAR_VOLUME_CM3
from .potential import (Configuration, EnergyBreakdown, ForceField, Framework, GuestModel,
                        load_forcefield)
from .structio import Supercell

HUMID_AIR = (("I2", 0.0003), ("N2", 0.685), ("O2", 0.184), ("H2O", 0.122))


class NonConvergedWidthWarning(UserWarning):
    """Block standard error above 20% of the mean for some species."""


class InvalidSupercell(ValueError):
    pass


@dataclass
class MoveWeights:
    translation: float = 1.0
    rotation: float = 1.0
    reinsertion: float = 1.0
    insertion_deletion: float = 2.0
    identity_change: float = 1.0


MOVES = ("translation", "rotation", "reinsertion", "insertion", "deletion", "identity_change")


@dataclass
class SimulationConditions:
    temperature: float
    pressure: float                     # Pa
    species: list                       # GuestModel, mole_fraction taken from the model
    cycles_equilibration: int = 50_000
    cycles_production: int = 50_000
    seed: int = 0
    weights: MoveWeights = field(default_factory=MoveWeights)
    blocks: int = 5
    min_moves_per_cycle: int = 20

    def __post_init__(self):
        if self.temperature <= 0 or self.pressure < 0:
            raise ValueError("temperature must be positive and pressure non-negative")
        y = np.array([g.mole_fraction for g in self.species], dtype=float)
        if np.any(y <= 0):
            raise ValueError("mole fractions must be positive")
        y = y / y.sum()
        self.species = [g.with_mole_fraction(float(v)) for g, v in zip(self.species, y)]
        if self.blocks < 5:
            raise ValueError("at least 5 blocks are required")

    @property
    def mole_fractions(self) -> np.ndarray:
        return np.array([g.mole_fraction for g in self.species])

    @property
    def fugacities(self) -> np.ndarray:
        """Ideal-gas fugacities y_i P in Pa."""
        return self.mole_fractions * self.pressure


def humid_air_conditions(ff: ForceField | None = None, **overrides) -> SimulationConditions:
    """423 K, 1 bar, 300 ppm I2 / 68.5% N2 / 18.4% O2 / 12.2% H2O (renormalized)."""
    ff = ff or load_forcefield()
    species = [ff.guest(name).with_mole_fraction(y) for name, y in HUMID_AIR]
    kw = dict(temperature=423.0, pressure=1.0 * BAR, species=species,
              cycles_equilibration=50_000, cycles_production=50_000)
    kw.update(overrides)
    return SimulationConditions(**kw)


@dataclass
class SpeciesResult:
    name: str
    mole_fraction: float
    molecules: float            # <N> per supercell
    molecules_err: float
    uptake_cm3_g: float         # cm^3(STP)/g framework
    uptake_cm3_g_err: float
    uptake_mg_g: float
    converged: bool


@dataclass
class GcmcResult:
    species: list
    selectivity_I2: float
    selectivity_flag: str
    acceptance: dict
    energy_mean: float          # K
    energy_std: float
    final_energy: float
    recomputed_energy: float
    converged: bool
    moments: dict               # production averages used by fluctuation formulas
    block_moments: list
    n_histogram: dict
    moves_production: int

    def by_name(self, name: str) -> SpeciesResult:
        return next(s for s in self.species if s.name == name)

    def to_dict(self) -> dict:
        return {
            "species": [vars(s) for s in self.species],
            "selectivity_I2": self.selectivity_I2,
            "selectivity_flag": self.selectivity_flag,
            "acceptance": self.acceptance,
            "energy_mean": self.energy_mean,
            "energy_std": self.energy_std,
            "final_energy": self.final_energy,
            "recomputed_energy": self.recomputed_energy,
            "converged": self.converged,
            "moves_production": self.moves_production,
        }


def selectivity(uptakes, fractions, target: int = 0) -> tuple[float, str]:
    """(X_t / Y_t) / (X_others / Y_others); returns (value, flag).

    A zero uptake of every competitor with positive target uptake gives +inf
    with flag ``"division_by_zero"``.
    """
    x = np.asarray(uptakes, dtype=float)
    y = np.asarray(fractions, dtype=float)
    others = np.arange(len(x)) != target
    x_t, y_t = x[target], y[target]
    x_o, y_o = x[others].sum(), y[others].sum()
    if x_t == 0.0:
        return 0.0, ""
    if x_o <= 0.0:
        return math.inf, "division_by_zero"
    return float((x_t / y_t) / (x_o / y_o)), ""


def random_rotation(rng) -> np.ndarray:
    """Uniform random rotation matrix from a unit quaternion (Shoemake)."""
    u1, u2, u3 = rng.random(3)
    a, b = math.sqrt(1 - u1), math.sqrt(u1)
    w, x = a * math.sin(2 * math.pi * u2), a * math.cos(2 * math.pi * u2)
    y, z = b * math.sin(2 * math.pi * u3), b * math.cos(2 * math.pi * u3)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def small_rotation(rng, max_angle: float) -> np.ndarray:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    theta = (2.0 * rng.random() - 1.0) * max_angle
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)


class GcmcSimulation:
    """One Markov chain; ``run()`` performs equilibration then production."""

    def __init__(self, framework: Framework, cond: SimulationConditions):
        widths = framework.supercell.widths if len(framework.supercell) or True else None
        if np.any(widths <= 2.0 * framework.cutoff):
            raise InvalidSupercell(
                f"perpendicular widths {widths} must exceed twice the cutoff {framework.cutoff}")
        self.fw = framework
        self.cond = cond
        self.config = Configuration(framework, cond.species)
        self.rng = np.random.Generator(np.random.PCG64(cond.seed))
        self.beta = 1.0 / cond.temperature
        self.bfv = cond.fugacities * framework.volume * 1e-30 / (KB * cond.temperature)
        self._bfv = self.bfv.tolist()
        self.energy = 0.0
        nspec = len(cond.species)
        self.max_disp = np.full(nspec, 1.0)
        self.max_rot = np.full(nspec, 0.5)
        self.attempts = {m: 0 for m in MOVES}
        self.accepted = {m: 0 for m in MOVES}
        self._tune_att = np.zeros((2, nspec))
        self._tune_acc = np.zeros((2, nspec))
        self.rotatable = [g.is_rotatable for g in cond.species]
        self._needs_rotation = [bool(np.any(g.coords)) for g in cond.species]
        w = cond.weights
        weights = np.array([
            w.translation,
            w.rotation if any(self.rotatable) else 0.0,
            w.reinsertion,
            w.insertion_deletion,
            w.identity_change if nspec > 1 else 0.0,
        ])
        if weights.sum() <= 0:
            raise ValueError("all move weights are zero")
        self.move_cdf = np.cumsum(weights / weights.sum()).tolist()
        self._movers = (self._translate, self._rotate, self._reinsert,
                        self._insert_delete, self._identity)
        self.counts = np.zeros(nspec, dtype=int)
        self.nspec = nspec
        self.by_species = [[] for _ in range(nspec)]

    # -- helpers
    def _place(self, species: int, center, rot=None) -> np.ndarray:
        coords = self.cond.species[species].coords
        if rot is None:
            return center + coords
        return center + coords @ rot.T

    def _orientation(self, species: int):
        """Random orientation, or None for a point particle (no rotation needed)."""
        return random_rotation(self.rng) if self._needs_rotation[species] else None

    def _random_center(self):
        return self.rng.random(3) @ self.fw.matrix

    def _wrap_center(self, center, positions):
        f = center @ self.fw.inverse
        shift = np.floor(f)
        if np.any(shift):
            d = shift @ self.fw.matrix
            return center - d, positions - d
        return center, positions

    def _accept(self, log_acc: float) -> bool:
        if log_acc >= 0.0:
            return True
        if log_acc == -math.inf or math.isnan(log_acc):
            return False
        return self.rng.random() < math.exp(log_acc)

    def _pick(self, species: int | None = None) -> int | None:
        mols = self.config.molecules
        if species is None:
            return int(self.rng.integers(len(mols))) if mols else None
        idx = self.by_species[species]
        return idx[int(self.rng.integers(len(idx)))] if idx else None

    def _rebuild_index(self):
        self.by_species = [[] for _ in self.cond.species]
        for k, m in enumerate(self.config.molecules):
            self.by_species[m.species].append(k)

    # -- moves
    def _translate(self):
        k = self._pick()
        if k is None:
            return "translation", False
        m = self.config.molecules[k]
        s = m.species
        d = (2.0 * self.rng.random(3) - 1.0) * self.max_disp[s]
        new = m.positions + d
        du = self._delta(s, new, k, m)
        self._tune_att[0, s] += 1
        ok = self._accept(-self.beta * du)
        if ok:
            c, new = self._wrap_center(m.center + d, new)
            self.config.replace(k, s, new, center=c)
            self.energy += du
            self._tune_acc[0, s] += 1
        return "translation", ok

    def _rotate(self):
        cand = [k for k, m in enumerate(self.config.molecules) if self.rotatable[m.species]]
        if not cand:
            return "rotation", False
        k = cand[int(self.rng.integers(len(cand)))]
        m = self.config.molecules[k]
        s = m.species
        rot = small_rotation(self.rng, self.max_rot[s])
        new = m.center + (m.positions - m.center) @ rot.T
        du = self._delta(s, new, k, m)
        self._tune_att[1, s] += 1
        ok = self._accept(-self.beta * du)
        if ok:
            self.config.replace(k, s, new, center=m.center)
            self.energy += du
            self._tune_acc[1, s] += 1
        return "rotation", ok

    def _reinsert(self):
        k = self._pick()
        if k is None:
            return "reinsertion", False
        m = self.config.molecules[k]
        s = m.species
        c = self._random_center()
        new = self._place(s, c, self._orientation(s))
        du = self._delta(s, new, k, m)
        ok = self._accept(-self.beta * du)
        if ok:
            self.config.replace(k, s, new, center=c)
            self.energy += du
        return "reinsertion", ok

    def _delta(self, s, new, k, m, s_new=None):
        s_new = s if s_new is None else s_new
        e_new = self.config.molecule_energy(s_new, new, exclude=k).total
        if math.isinf(e_new):
            return math.inf
        e_old = self.config.molecule_energy(s, m.positions, exclude=k).total
        return e_new - e_old

    def _insert_delete(self):
        s = int(self.rng.random() * self.nspec)
        n = int(self.counts[s])
        if self.rng.random() < 0.5:
            c = self._random_center()
            pos = self._place(s, c, self._orientation(s))
            e = self.config.molecule_energy(s, pos).total
            bfv = self._bfv[s]
            log_acc = -math.inf if math.isinf(e) or bfv == 0 else (
                math.log(bfv / (n + 1)) - self.beta * e)
            ok = self._accept(log_acc)
            if ok:
                self.config.add(s, pos, center=c)
                self.by_species[s].append(len(self.config.molecules) - 1)
                self.counts[s] += 1
                self.energy += e
            return "insertion", ok
        if n == 0:
            return "deletion", False
        k = self._pick(s)
        m = self.config.molecules[k]
        e = self.config.molecule_energy(s, m.positions, exclude=k).total
        ok = self._accept(math.log(n / self._bfv[s]) + self.beta * e)
        if ok:
            self.config.remove(k)
            self.counts[s] -= 1
            self.energy -= e
            self._rebuild_index()
        return "deletion", ok

    def _identity(self):
        nspec = len(self.cond.species)
        i = int(self.rng.integers(nspec))
        j = int(self.rng.integers(nspec - 1))
        j = j + 1 if j >= i else j
        if self.counts[i] == 0:
            return "identity_change", False
        k = self._pick(i)
        m = self.config.molecules[k]
        new = self._place(j, m.center, self._orientation(j))
        du = self._delta(i, new, k, m, s_new=j)
        f = self.cond.fugacities
        log_acc = (math.log(f[j] / f[i]) + math.log(self.counts[i] / (self.counts[j] + 1))
                   - self.beta * du)
        ok = self._accept(log_acc)
        if ok:
            self.config.replace(k, j, new, center=m.center)
            self.counts[i] -= 1
            self.counts[j] += 1
            self.energy += du
            self._rebuild_index()
        return "identity_change", ok

    def step(self):
        move = bisect.bisect_right(self.move_cdf, self.rng.random())
        name, ok = self._movers[min(move, 4)]()
        self.attempts[name] += 1
        self.accepted[name] += ok

    def _tune(self):
        for kind, arr in ((0, self.max_disp), (1, self.max_rot)):
            for s in range(len(arr)):
                att = self._tune_att[kind, s]
                if att < 10:
                    continue
                ratio = self._tune_acc[kind, s] / att
                arr[s] *= 1.05 if ratio > 0.5 else 0.95
                hi = 0.5 * float(self.fw.supercell.widths.min()) if kind == 0 else math.pi
                arr[s] = min(max(arr[s], 0.01), hi)
        self._tune_att[:] = 0
        self._tune_acc[:] = 0

    def _sampled_moves(self, nmov: int) -> np.ndarray:
        """Run ``nmov`` moves, sampling the state after every move.

        The state only changes on accepted moves, so samples are accumulated
        as (state x number of moves it persisted).
        """
        acc = 0.0
        pending = 0
        snap = (self.counts.tobytes(), self.energy)
        for _ in range(nmov):
            self.step()
            now = (self.counts.tobytes(), self.energy)
            if now != snap:
                acc = acc + self._flush(snap, pending)
                snap, pending = now, 0
            pending += 1
        return acc + self._flush(snap, pending)

    def _flush(self, snap, weight):
        if weight == 0:
            return 0.0
        c = np.frombuffer(snap[0], dtype=self.counts.dtype).astype(float)
        u = snap[1]
        n = c.sum()
        return weight * np.concatenate([c, c * c, u * c, [u, u * u, n * n, 1.0]])

    def moves_in_cycle(self) -> int:
        return max(self.cond.min_moves_per_cycle, len(self.config.molecules))

    def run(self) -> GcmcResult:
        cond = self.cond
        for cycle in range(cond.cycles_equilibration):
            for _ in range(self.moves_in_cycle()):
                self.step()
            if (cycle + 1) % 10 == 0:
                self._tune()
        self.attempts = {m: 0 for m in MOVES}
        self.accepted = {m: 0 for m in MOVES}

        nspec = len(cond.species)
        nb = cond.blocks
        block_of = np.minimum(np.arange(cond.cycles_production) * nb // max(cond.cycles_production, 1), nb - 1)
        # per block: sum N_s, N_s^2, U*N_s, then U, U^2, Ntot^2, samples
        sums = np.zeros((nb, 3 * nspec + 4))
        hist = {}
        moves = 0
        for cycle in range(cond.cycles_production):
            nmov = self.moves_in_cycle()
            sums[block_of[cycle]] += self._sampled_moves(nmov)
            moves += nmov
            ntot = int(self.counts.sum())
            hist[ntot] = hist.get(ntot, 0) + 1
        return self._result(sums, hist, moves)

    def _result(self, sums, hist, moves) -> GcmcResult:
        cond = self.cond
        nspec = len(cond.species)
        cnt = np.maximum(sums[:, 3 * nspec + 3], 1)
        block_n = sums[:, :nspec] / cnt[:, None]
        tot = sums.sum(axis=0)
        ntot = max(tot[3 * nspec + 3], 1)
        mean_n = tot[:nspec] / ntot
        se_n = block_n.std(axis=0, ddof=1) / math.sqrt(cond.blocks)
        mass = self.fw.mass
        species = []
        converged = True
        for s, g in enumerate(cond.species):
            conv = not (mean_n[s] > 0 and se_n[s] > 0.2 * mean_n[s])
            converged &= conv
            if mass > 0:
                up = mean_n[s] * STP_MOLAR_VOLUME_CM3 / mass
                up_err = se_n[s] * STP_MOLAR_VOLUME_CM3 / mass
                mg = mean_n[s] * g.molweight / mass * 1e3
            else:
                up = up_err = mg = math.nan
            species.append(SpeciesResult(g.name, g.mole_fraction, float(mean_n[s]), float(se_n[s]),
                                         float(up), float(up_err), float(mg), bool(conv)))
        if not converged:
            warnings.warn(f"block standard error above 20% of the mean "
                          f"({', '.join(s.name for s in species if not s.converged)})",
                          NonConvergedWidthWarning, stacklevel=3)
        names = [g.name for g in cond.species]
        if "I2" in names and nspec > 1:
            sel, flag = selectivity(mean_n, cond.mole_fractions, names.index("I2"))
        else:
            sel, flag = math.nan, "no_I2"
        u_mean = tot[3 * nspec] / ntot
        u_var = max(tot[3 * nspec + 1] / ntot - u_mean ** 2, 0.0)
        recomputed = self.config.total_energy().total
        moments = {
            "N": mean_n.tolist(),
            "N2": (tot[nspec:2 * nspec] / ntot).tolist(),
            "UN": (tot[2 * nspec:3 * nspec] / ntot).tolist(),
            "U": u_mean,
            "Ntot2": tot[3 * nspec + 2] / ntot,
        }
        blocks = []
        for b in range(cond.blocks):
            c = cnt[b]
            blocks.append({"N": (sums[b, :nspec] / c).tolist(),
                           "N2": (sums[b, nspec:2 * nspec] / c).tolist(),
                           "UN": (sums[b, 2 * nspec:3 * nspec] / c).tolist(),
                           "U": sums[b, 3 * nspec] / c})
        acc = {m: (self.accepted[m] / self.attempts[m] if self.attempts[m] else 0.0) for m in MOVES}
        return GcmcResult(species, sel, flag, acc, float(u_mean), math.sqrt(u_var),
                          float(self.energy), float(recomputed), bool(converged), moments,
                          blocks, dict(sorted(hist.items())), moves)


def run_gcmc(system: Framework | Supercell, cond: SimulationConditions,
             ff: ForceField | None = None, use_charges: bool = False) -> GcmcResult:
    """Run one GCMC chain on ``system`` (a prepared Framework or a bare Supercell)."""
    if isinstance(system, Supercell):
        system = Framework(system, ff or load_forcefield(), use_charges=use_charges)
    return GcmcSimulation(system, cond).run()


def fluctuation_heat(result: GcmcResult, temperature: float, species: int = 0) -> tuple[float, float]:
    """Q = RT - (<UN> - <U><N>) / (<N^2> - <N>^2) in kJ/mol, with block standard error."""

    def q(m):
        n = m["N"][species]
        var = m["N2"][species] - n * n
        if var <= 0:
            return math.nan
        return R_GAS * (temperature - (m["UN"][species] - m["U"] * n) / var) / 1000.0

    total = q(result.moments)
    per_block = np.array([q(b) for b in result.block_moments])
    err = float(np.nanstd(per_block, ddof=1) / math.sqrt(np.sum(~np.isnan(per_block))))
    return total, err
