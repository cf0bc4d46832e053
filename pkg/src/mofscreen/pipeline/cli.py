"""Command-line entry point: ``mofscreen <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .. import __version__
from ..chemgraph import MOLECULAR_COLUMNS
from ..fingerprint import fingerprint_columns
from ..mlcore import Dataset, TooFewRows, TreeEnsemble
from ..structio import StructureError, read_cif
from ..widom import CHEMICAL_SPECIES, chemical_descriptors, helium_void_fraction
from . import schema
from .analysis import (explain_model, shared_bits, top_candidates, train_and_explain,
                       window_analysis, write_candidates, write_window)
from .config import ConfigError, load_config
from .screen import (EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, _forcefield, conditions, descriptor_row,
                     list_cifs, process_structure, screen, structure_seed, table_from_records)
from .table import DescriptorTable, EmptySelection, SchemaMismatch, format_value

log = logging.getLogger("mofscreen")

DESCRIPTOR_HEADER = (("id",) + schema.STRUCTURAL + tuple(MOLECULAR_COLUMNS) + schema.CHEMICAL
                     + tuple(fingerprint_columns()) + ("eligible", "no_metal", "residual_atoms", "chem_degenerate"))


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master RNG seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--config", default=None, help="key = value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")


def _sim_flags(p):
    p.add_argument("--cycles-eq", type=int, dest="cycles_eq")
    p.add_argument("--cycles-prod", type=int, dest="cycles_prod")
    p.add_argument("--temperature", type=float)
    p.add_argument("--pressure", type=float, help="total pressure in Pa")
    p.add_argument("--composition", help="e.g. I2:0.0003,N2:0.685,O2:0.184,H2O:0.122")
    p.add_argument("--use-charges", action="store_true", default=None, dest="use_charges")
    p.add_argument("--tip3p-canonical", action="store_true", default=None, dest="tip3p_canonical",
                   help="rescale the water O-H bond to 0.9572 A")
    p.add_argument("--forcefield")


def _desc_flags(p):
    p.add_argument("--grid-spacing", type=float, dest="grid_spacing")
    p.add_argument("--radii", help="element radius table for pore geometry")
    p.add_argument("--widom-insertions", type=int, dest="widom_insertions")
    p.add_argument("--void-insertions", type=int, dest="void_insertions")
    p.add_argument("--sa-samples", type=int, dest="sa_samples")


def _ml_flags(p):
    p.add_argument("--feature-set", dest="feature_set",
                   choices=("structural", "molecular", "chemical", "fingerprint"))
    p.add_argument("--target", choices=("I2_uptake", "H2O_uptake", "I2_selectivity"))
    p.add_argument("--r2-paper-notation", action="store_true", default=None, dest="r2_paper_notation",
                   help="also report R2 with the prediction mean in the denominator")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mofscreen", description="GCMC/ML screening of porous frameworks")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("descriptors", help="structural, molecular, chemical and fingerprint columns")
    p.add_argument("inputs", nargs="+", help="CIF files or directories")
    p.add_argument("-o", "--output", required=True, help="descriptor CSV")
    p.add_argument("--dump-graph", dest="dump_graph", help="directory for bond-graph edge lists")
    _desc_flags(p); _sim_flags(p); _common(p)

    p = sub.add_parser("simulate", help="GCMC of one structure; JSON result record")
    p.add_argument("cif")
    p.add_argument("-o", "--output", help="JSON file (default: stdout)")
    _sim_flags(p); _common(p)

    p = sub.add_parser("widom", help="Henry coefficients and heats of adsorption")
    p.add_argument("cif")
    p.add_argument("--species", default=",".join(CHEMICAL_SPECIES))
    p.add_argument("--insertions", type=int, dest="widom_insertions")
    p.add_argument("--void", action="store_true", help="also report the helium void fraction")
    p.add_argument("-o", "--output")
    _sim_flags(p); _common(p)

    p = sub.add_parser("table", help="assemble the descriptor table from per-structure JSON records")
    p.add_argument("results", help="directory of <id>.json records")
    p.add_argument("-o", "--output", required=True)
    _common(p)

    p = sub.add_parser("train", help="train both models, write metrics, parity plots and SHAP reports")
    p.add_argument("--table", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--no-tune", action="store_false", default=None, dest="tune")
    _ml_flags(p); _common(p)

    p = sub.add_parser("explain", help="SHAP ranking and Pearson matrix for a saved model")
    p.add_argument("--table", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--top", type=int, default=20)
    _ml_flags(p); _common(p)

    p = sub.add_parser("report", help="descriptor-window analysis and top candidates")
    p.add_argument("--table", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--feature", dest="window_feature")
    p.add_argument("--bins", type=int, dest="window_bins")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--target", choices=("I2_uptake", "H2O_uptake", "I2_selectivity"))
    _common(p)

    p = sub.add_parser("screen", help="full pipeline over a CIF directory")
    p.add_argument("--input", dest="input_dir")
    p.add_argument("-o", "--output", dest="output_dir")
    p.add_argument("--train", action="store_true", help="also train and explain when enough rows exist")
    _desc_flags(p); _sim_flags(p); _ml_flags(p); _common(p)
    return ap


_CFG_KEYS = ("seed", "workers", "cycles_eq", "cycles_prod", "temperature", "pressure", "composition",
             "use_charges", "tip3p_canonical", "forcefield", "grid_spacing", "radii", "widom_insertions",
             "void_insertions", "sa_samples", "feature_set", "target", "r2_paper_notation", "tune",
             "window_feature", "window_bins", "top_k", "input_dir", "output_dir")


def _config(args):
    over = {k: getattr(args, k) for k in _CFG_KEYS if hasattr(args, k)}
    return load_config(args.config, **over)


def _cifs(inputs) -> list[Path]:
    out = []
    for item in inputs:
        p = Path(item)
        out.extend(list_cifs(p) if p.is_dir() else [p])
    return out


def _dump(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True, default=float) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_descriptors(args, cfg) -> int:
    ff = _forcefield(cfg)
    if args.dump_graph:
        Path(args.dump_graph).mkdir(parents=True, exist_ok=True)
    rows, failed = [], 0
    for path in _cifs(args.inputs):
        sid = path.stem
        try:
            row, _ = descriptor_row(read_cif(path), cfg, ff, structure_seed(cfg.seed, sid),
                                    graph_dir=args.dump_graph, sid=sid)
            rows.append(row)
        except Exception as exc:  # noqa: BLE001
            failed += 1
            log.error("%s: %s: %s", sid, type(exc).__name__, exc)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DESCRIPTOR_HEADER)
        for r in sorted(rows, key=lambda r: r["id"]):
            w.writerow([format_value(r.get(c)) for c in DESCRIPTOR_HEADER])
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_simulate(args, cfg) -> int:
    rec = process_structure(args.cif, cfg)
    if not rec["ok"]:
        log.error("%s failed during %s: %s", rec["id"], rec["stage"], rec["error"])
        return EXIT_PARTIAL
    _dump(rec["record"], args.output)
    return EXIT_OK


def cmd_widom(args, cfg) -> int:
    from ..potential import Framework
    from ..structio import build_supercell
    s = read_cif(args.cif)
    sid = Path(args.cif).stem
    ff = _forcefield(cfg)
    fw = Framework(build_supercell(s, cfg.cutoff), ff, cutoff=cfg.cutoff, use_charges=cfg.use_charges)
    seed = structure_seed(cfg.seed, sid)
    species = tuple(x.strip() for x in args.species.split(",") if x.strip())
    chem = chemical_descriptors(fw, ff, cfg.temperature, cfg.widom_insertions, seed + 2, species)
    out = {"id": sid, "temperature": cfg.temperature, "insertions": cfg.widom_insertions,
           "henry_mol_kg_Pa": chem.henry, "henry_err": chem.henry_err,
           "heat_kJ_mol": chem.heat, "heat_err": chem.heat_err, "degenerate": list(chem.degenerate)}
    if args.void:
        out["void_fraction"] = helium_void_fraction(fw, ff, n=cfg.void_insertions, seed=seed)
    _dump(out, args.output)
    return EXIT_OK


def cmd_table(args, cfg) -> int:
    t = table_from_records(args.results)
    t.write(args.output)
    print(f"{len(t)} rows -> {args.output}")
    return EXIT_OK


def _print_metrics(rep):
    for kind, m in rep.metrics.items():
        extra = f" R2(prediction-mean denominator)={m.r2_paper_notation:.4f}" if m.r2_paper_notation is not None else ""
        print(f"{kind:8s} R2={m.r2:.4f} MAE={m.mae:.4g} MSE={m.mse:.4g} RMSE={m.rmse:.4g}{extra}")
    if rep.degenerate:
        print("target has zero variance: single-leaf models")


def cmd_train(args, cfg) -> int:
    t = DescriptorTable.read(args.table)
    rep = train_and_explain(t, cfg, args.output)
    _print_metrics(rep)
    return EXIT_OK


def cmd_explain(args, cfg) -> int:
    t = DescriptorTable.read(args.table)
    model = TreeEnsemble.from_json(Path(args.model).read_text())
    d: Dataset = t.dataset(cfg.feature_set, cfg.target)
    if tuple(model.feature_names) != tuple(d.names):
        raise ConfigError("model features do not match the selected feature set")
    rows, _ = explain_model(model, d, args.output, model.kind, top=args.top)
    for i, r in enumerate(rows[:args.top], 1):
        print(f"{i:3d} {r.feature:24s} {r.mean_abs_shap:.4g} {'+' if r.sign >= 0 else '-'}")
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    t = DescriptorTable.read(args.table)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ws = window_analysis(t, cfg.window_feature, cfg.window_bins, cfg.target)
    write_window(ws, t, out)
    print(f"{cfg.target} window over {ws.feature}: {ws.window[0]:.3f} - {ws.window[1]:.3f}")
    cands = top_candidates(t, cfg.top_k, cfg.target)
    write_candidates(cands, out / "top_candidates.csv")
    for i, c in enumerate(cands, 1):
        print(f"{i}. {c.id} {c.value:.4g} " + " ".join(f"Bit_{k}" for k, _ in c.bits))
    if cands:
        print("shared bits: " + " ".join(f"Bit_{k}" for k in shared_bits(cands)))
    return EXIT_OK


def cmd_screen(args, cfg) -> int:
    if not cfg.input_dir:
        raise ConfigError("screen needs --input or input_dir in the config")
    res = screen(cfg)
    print(f"{len(res.table)} rows, {len(res.failures)} failures, {res.n_inputs} inputs, {res.elapsed:.1f} s")
    if args.train:
        try:
            rep = train_and_explain(res.table, cfg, Path(cfg.output_dir) / "ml")
            _print_metrics(rep)
        except (TooFewRows, EmptySelection) as exc:
            print(f"training skipped: {exc}")
    return res.exit_code


COMMANDS = {"descriptors": cmd_descriptors, "simulate": cmd_simulate, "widom": cmd_widom,
            "table": cmd_table, "train": cmd_train, "explain": cmd_explain, "report": cmd_report,
            "screen": cmd_screen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TooFewRows, EmptySelection, SchemaMismatch, StructureError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
