"""Per-structure screening workflow and the parallel batch driver."""
from __future__ import annotations

import json
import logging
import time
import traceback
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import elements
from ..chemgraph import assign_atom_types, dump_graph, molecular_descriptors, perceive_bonds
from ..fingerprint import fingerprint_feature_block, maccs_subset
from ..gcmc import SimulationConditions, run_gcmc
from ..poregeom import (accessible_surface_area, build_distance_grid, bulk_descriptors,
                        largest_cavity_diameter, pore_limiting_diameter)
from ..potential import Framework, load_forcefield
from ..structio import build_supercell, read_cif
from ..widom import chemical_descriptors, helium_void_fraction
from . import schema
from .config import ScreeningConfig
from .table import DescriptorTable, format_value

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def structure_seed(seed: int, sid: str) -> int:
    """Per-structure RNG seed; independent of worker count and arrival order."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(sid.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _forcefield(cfg: ScreeningConfig):
    return load_forcefield(cfg.forcefield or None, tip3p_canonical=cfg.tip3p_canonical)


def _radii(cfg: ScreeningConfig):
    return elements.read_radii(cfg.radii) if cfg.radii else None


def conditions(cfg: ScreeningConfig, ff, seed: int) -> SimulationConditions:
    species = [ff.guest(name).with_mole_fraction(y) for name, y in cfg.species]
    return SimulationConditions(cfg.temperature, cfg.pressure, species, cfg.cycles_eq,
                                cfg.cycles_prod, seed=seed)


def descriptor_row(s, cfg: ScreeningConfig, ff=None, seed: int = 0, graph_dir=None,
                   sid: str | None = None) -> tuple[dict, object]:
    """Structural, molecular, chemical and fingerprint columns of one structure.

    Returns (row, framework) so a caller can reuse the prepared framework.
    """
    ff = ff or _forcefield(cfg)
    radii = _radii(cfg)
    sid = sid or s.name
    row = {"id": sid}
    fw = Framework(build_supercell(s, cfg.cutoff), ff, cutoff=cfg.cutoff, use_charges=cfg.use_charges)
    grid = build_distance_grid(s, cfg.grid_spacing, radii)
    lcd = largest_cavity_diameter(grid)
    pld = min(pore_limiting_diameter(grid), lcd)
    phi = helium_void_fraction(fw, ff, n=cfg.void_insertions, seed=seed)
    rho, pv = bulk_descriptors(s, phi)
    sa = accessible_surface_area(s, samples_per_atom=cfg.sa_samples, radii=radii, seed=seed + 1)
    row.update(PLD=pld, LCD=lcd, void_fraction=phi, surface_area=sa, pore_volume=pv, density=rho)

    g = perceive_bonds(s)
    types = assign_atom_types(g)
    mol = molecular_descriptors(s, g, types)
    row.update(mol.columns())
    row.update(fingerprint_feature_block(maccs_subset(g, types)))
    if graph_dir is not None:
        dump_graph(g, Path(graph_dir) / f"{sid}.graph.txt", types)

    chem = chemical_descriptors(fw, ff, temperature=cfg.temperature, n=cfg.widom_insertions, seed=seed + 2)
    row.update(chem.columns())
    row.update(eligible=pld > cfg.pld_gate, no_metal=mol.metal.no_metal, residual_atoms=mol.residual,
               chem_degenerate=";".join(chem.degenerate))
    return row, fw


def process_structure(path: str, cfg: ScreeningConfig) -> dict:
    """Full per-structure workflow.  Never raises: failures come back as records."""
    sid = Path(path).stem
    stage = "parse"
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = read_cif(path)
            seed = structure_seed(cfg.seed, sid)
            ff = _forcefield(cfg)
            stage = "descriptors"
            row, fw = descriptor_row(s, cfg, ff, seed, sid=sid)
            stage = "gcmc"
            res = run_gcmc(fw, conditions(cfg, ff, seed + 3))
        for sp in res.species:
            row[f"{sp.name}_uptake"] = sp.uptake_cm3_g
            row[f"{sp.name}_uptake_err"] = sp.uptake_cm3_g_err
        row.update(I2_selectivity=res.selectivity_I2, selectivity_flag=res.selectivity_flag,
                   converged=res.converged)
        record = {"id": sid, "seed": seed, "row": {k: format_value(v) for k, v in row.items()},
                  "gcmc": res.to_dict(), "warnings": sorted({str(w.message) for w in caught})}
        return {"ok": True, "id": sid, "row": row, "record": record}
    except Exception as exc:  # noqa: BLE001 - every failure is recorded, none aborts the batch
        return {"ok": False, "id": sid, "stage": stage, "error": f"{type(exc).__name__}: {exc}",
                "trace": traceback.format_exc(limit=3)}


@dataclass
class ScreenResult:
    table: DescriptorTable
    failures: list = field(default_factory=list)
    n_inputs: int = 0
    elapsed: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_PARTIAL if self.failures else EXIT_OK


def list_cifs(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".cif")


def screen(cfg: ScreeningConfig) -> ScreenResult:
    """Screen every CIF of ``cfg.input_dir``; writes the table, JSON records and the failure log."""
    cfg.validate(need_dirs=True)
    t0 = time.time()
    paths = list_cifs(cfg.input_dir)
    out = Path(cfg.output_dir)
    (out / "results").mkdir(parents=True, exist_ok=True)
    if cfg.workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(process_structure, map(str, paths), [cfg] * len(paths)))
    else:
        outcomes = [process_structure(str(p), cfg) for p in paths]
    # single writer: everything is serialised here, in id order
    table = DescriptorTable()
    failures = []
    for o in sorted(outcomes, key=lambda o: o["id"]):
        if o["ok"]:
            table.rows.append(o["row"])
            (out / "results" / f"{o['id']}.json").write_text(json.dumps(o["record"], indent=1, sort_keys=True) + "\n")
        else:
            failures.append(o)
            log.error("%s failed during %s: %s", o["id"], o["stage"], o["error"])
    table.write(out / "descriptors.csv")
    with open(out / "failures.log", "w") as fh:
        for f in failures:
            fh.write(f"{f['id']}\t{f['stage']}\t{f['error']}\n")
    return ScreenResult(table, failures, len(paths), time.time() - t0)


def table_from_records(results_dir) -> DescriptorTable:
    """Rebuild the descriptor table from per-structure JSON records."""
    head = schema.header()
    rows = []
    for p in sorted(Path(results_dir).glob("*.json")):
        rec = json.loads(p.read_text())
        rows.append({k: rec["row"].get(k, "") for k in head})
    return DescriptorTable(rows, head)
