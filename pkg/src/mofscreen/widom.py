"""Widom test-particle insertion: Henry coefficients, adsorption heats, void fraction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import R_GAS, AMU_G, A3_M3
from .potential import ForceField, Framework, GuestModel, load_forcefield
from .structio import Supercell

CHEMICAL_SPECIES = ("I2", "H2O", "N2", "O2")


class DegenerateAverage(ValueError):
    """Boltzmann-factor average is zero: every insertion overlapped."""


@dataclass
class WidomSample:
    w: float                # <exp(-beta dU)>
    uw: float               # <dU exp(-beta dU)>, K
    w_err: float
    uw_err: float
    insertions: int
    block_w: np.ndarray = field(repr=False)
    block_uw: np.ndarray = field(repr=False)


def _random_rotations(rng, n: int) -> np.ndarray:
    u1, u2, u3 = rng.random((3, n))
    a, b = np.sqrt(1 - u1), np.sqrt(u1)
    w, x = a * np.sin(2 * np.pi * u2), a * np.cos(2 * np.pi * u2)
    y, z = b * np.sin(2 * np.pi * u3), b * np.cos(2 * np.pi * u3)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
    ], axis=1)


def widom_sample(system, g: GuestModel, temperature: float, n: int = 100_000,
                 seed: int = 0, shards: int = 10, batch: int = 512) -> WidomSample:
    """Average Boltzmann factors of ``n`` random insertions of ``g``.

    ``system`` is a :class:`Framework` (or anything with ``matrix`` and
    ``batch_energy(guest, positions)``).  Insertions are split into
    ``shards`` independent RNG streams, which double as the error blocks.
    """
    if n < 10_000:
        raise ValueError("at least 10^4 insertions are required")
    streams = np.random.SeedSequence(seed).spawn(shards)
    sizes = [n // shards + (k < n % shards) for k in range(shards)]
    matrix = np.asarray(system.matrix)
    moving = np.any(g.coords)
    bw, buw = np.zeros(shards), np.zeros(shards)
    for k, (ss, size) in enumerate(zip(streams, sizes)):
        rng = np.random.Generator(np.random.PCG64(ss))
        sw = suw = 0.0
        for start in range(0, size, batch):
            m = min(batch, size - start)
            centers = rng.random((m, 3)) @ matrix
            if moving:
                rot = _random_rotations(rng, m)
                pos = centers[:, None, :] + np.einsum("bij,sj->bsi", rot, g.coords)
            else:
                pos = centers[:, None, :] + g.coords[None, :, :]
            du = system.batch_energy(g, pos)
            with np.errstate(over="ignore"):
                w = np.where(np.isinf(du), 0.0, np.exp(-du / temperature))
            uw = np.zeros_like(w)
            uw[w > 0] = du[w > 0] * w[w > 0]
            sw += w.sum()
            suw += uw.sum()
        bw[k], buw[k] = sw / size, suw / size
    weights = np.array(sizes) / n
    mean_w = float(np.sum(weights * bw))
    mean_uw = float(np.sum(weights * buw))
    se = lambda x: float(np.std(x, ddof=1) / math.sqrt(shards))
    return WidomSample(mean_w, mean_uw, se(bw), se(buw), n, bw, buw)


def henry_coefficient(w: float, temperature: float, framework_density: float) -> float:
    """K_H = <W> / (R T rho) in mol kg^-1 Pa^-1; density in kg/m^3."""
    if framework_density <= 0:
        raise ValueError("framework density must be positive")
    return w / (R_GAS * temperature * framework_density)


def heat_of_adsorption(w: float, uw: float, temperature: float) -> float:
    """Q = R T - <dU W>/<W>, kJ/mol, positive for favourable adsorption."""
    if not w > 0:
        raise DegenerateAverage("<W> must be positive")
    return R_GAS * (temperature - uw / w) / 1000.0


def framework_density_kg_m3(fw: Framework) -> float:
    return fw.mass * AMU_G * 1e-3 / (fw.volume * A3_M3)


def helium_void_fraction(fw: Framework, ff: ForceField | None = None, temperature: float = 298.0,
                         n: int = 100_000, seed: int = 0) -> float:
    """<exp(-beta U_He)> over uniform insertions.  Not clamped: may exceed 1 slightly."""
    ff = ff or load_forcefield()
    return widom_sample(fw, ff.guest("He"), temperature, n, seed).w


@dataclass
class ChemicalDescriptors:
    henry: dict             # species -> mol/(kg Pa)
    heat: dict              # species -> kJ/mol
    henry_err: dict
    heat_err: dict
    insertions: int
    degenerate: tuple = ()

    def columns(self) -> dict:
        out = {}
        for sp in CHEMICAL_SPECIES:
            out[f"{sp}_Henry"] = self.henry[sp]
            out[f"{sp}_heat"] = self.heat[sp]
        return out


def chemical_descriptors(fw: Framework, ff: ForceField | None = None, temperature: float = 423.0,
                         n: int = 100_000, seed: int = 0,
                         species=CHEMICAL_SPECIES) -> ChemicalDescriptors:
    """Henry coefficient and heat of adsorption at infinite dilution per species.

    A structure where every insertion overlaps reports heat 0 and lists the
    species in ``degenerate``.
    """
    ff = ff or load_forcefield()
    rho = framework_density_kg_m3(fw)
    henry, heat, henry_err, heat_err, bad = {}, {}, {}, {}, []
    for k, name in enumerate(species):
        smp = widom_sample(fw, ff.guest(name), temperature, n, seed + 7919 * (k + 1))
        henry[name] = henry_coefficient(smp.w, temperature, rho)
        henry_err[name] = henry_coefficient(smp.w_err, temperature, rho)
        try:
            heat[name] = heat_of_adsorption(smp.w, smp.uw, temperature)
            per_block = [heat_of_adsorption(a, b, temperature)
                         for a, b in zip(smp.block_w, smp.block_uw) if a > 0]
            heat_err[name] = (float(np.std(per_block, ddof=1) / math.sqrt(len(per_block)))
                              if len(per_block) > 1 else math.nan)
        except DegenerateAverage:
            heat[name], heat_err[name] = 0.0, math.nan
            bad.append(name)
    return ChemicalDescriptors(henry, heat, henry_err, heat_err, n, tuple(bad))
