"""Pipeline: schema, config, descriptor table, analyses, screening and the CLI."""
import json
import math
import shutil
import warnings
from pathlib import Path

import numpy as np
import pytest

from mofscreen import elements
from mofscreen.mlcore import TooFewRows, metrics, train
from mofscreen.pipeline import (ConfigError, DescriptorTable, SchemaMismatch, ScreeningConfig, best_window,
                                load_config, parse_config, screen, structure_seed, table_from_records,
                                top_candidates, train_and_explain, train_models, window_analysis)
from mofscreen.pipeline import schema
from mofscreen.pipeline.cli import main
from mofscreen.pipeline.config import parse_composition
from mofscreen.pipeline.table import format_value

TOY = Path(elements.data_path("toy_corpus"))
FAST = """seed = 3
cycles_eq = 20
cycles_prod = 20
widom_insertions = 10000
void_insertions = 10000
sa_samples = 100
grid_spacing = 0.5
"""


def synthetic_table(n=500, seed=0, noise=0.1, eligible=1):
    """Full-schema rows whose I2 uptake depends on the structural, molecular and chemical blocks."""
    rng = np.random.default_rng(seed)
    g = schema.column_groups()
    rows = []
    for i in range(n):
        r = {c: "" for c in schema.header()}
        r["id"] = f"syn{i:05d}"
        for c in g["structural"] + g["molecular"] + g["chemical"]:
            r[c] = float(rng.normal())
        for c in g["fingerprint"]:
            r[c] = int(rng.random() < 0.5)
        y = (r["PLD"] + 0.5 * r["LCD"] ** 2 + math.sin(1.5 * r["C_R"]) + 0.7 * r["N_R"]
             + r["I2_Henry"] * r["I2_heat"] / math.sqrt(2) + 0.5 * r["H2O_Henry"] + noise * rng.normal())
        r.update(I2_uptake=y, H2O_uptake=float(rng.random()), I2_selectivity=float(rng.random() + 1),
                 eligible=eligible, converged=1, no_metal=0, residual_atoms=0, selectivity_flag="")
        rows.append(r)
    return DescriptorTable(rows)


# ---------------------------------------------------------------- schema


def test_schema_file_matches_module_columns():
    assert schema.header() == schema.expected_header()
    assert schema.header()[0] == "id"
    assert len(set(schema.header())) == len(schema.header())


def test_feature_sets_nested():
    s, m, c = (set(schema.feature_columns(k)) for k in ("structural", "molecular", "chemical"))
    assert s < m < c
    fp = schema.feature_columns("fingerprint")
    assert all(x.startswith("Bit_") for x in fp if x not in schema.STRUCTURAL + schema.CHEMICAL)


def test_empty_table_header_line_is_golden():
    text = DescriptorTable().to_csv()
    assert text == schema.header_line() + "\n"


# ---------------------------------------------------------------- config


def test_parse_config_comments_dashes_and_types():
    d = parse_config("# header\nseed = 4  # inline\ncycles-eq = 1e3\nuse_charges = yes\n\ntemperature=300\n")
    assert d == {"seed": 4, "cycles_eq": 1000, "use_charges": True, "temperature": 300.0}


@pytest.mark.parametrize("text", ["bogus = 1", "seed 4", "seed = 1.5", "use_charges = maybe",
                                  "temperature = hot"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        ScreeningConfig(workers=0).validate()
    with pytest.raises(ConfigError):
        ScreeningConfig(feature_set="x").validate()
    with pytest.raises(ConfigError):
        ScreeningConfig(grid_spacing=2.0).validate()
    with pytest.raises(ConfigError):
        ScreeningConfig(input_dir=str(tmp_path / "none")).validate(need_dirs=True)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.txt")


def test_overrides_and_composition(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("seed = 2\ntemperature = 300\n")
    cfg = load_config(p, seed=9, temperature=None)
    assert cfg.seed == 9 and cfg.temperature == 300.0
    assert parse_composition("I2:0.5, N2:0.5") == (("I2", 0.5), ("N2", 0.5))
    for bad in ("", "I2", "I2:0", "I2:x"):
        with pytest.raises(ConfigError):
            parse_composition(bad)


def test_structure_seed_depends_on_id_only():
    assert structure_seed(1, "a") == structure_seed(1, "a")
    assert structure_seed(1, "a") != structure_seed(1, "b")
    assert structure_seed(1, "a") != structure_seed(2, "a")


# ---------------------------------------------------------------- table


def test_format_value():
    assert format_value(True) == "1" and format_value(np.bool_(False)) == "0"
    assert format_value(3) == "3" and format_value(0.1) == "0.1" and format_value(None) == ""
    assert float(format_value(1 / 3)) == 1 / 3


def test_table_round_trip_byte_identical(tmp_path):
    t = synthetic_table(30, seed=1)
    t.rows.reverse()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    t.write(p1)
    DescriptorTable.read(p1).write(p2)
    assert p1.read_bytes() == p2.read_bytes()
    ids = [ln.split(",")[0] for ln in p1.read_text().splitlines()[1:]]
    assert ids == sorted(ids)


def test_schema_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,PLD\nx,1\n")
    with pytest.raises(SchemaMismatch):
        DescriptorTable.read(p)
    assert len(DescriptorTable.read(p, strict=False)) == 1


def test_dataset_drops_ineligible_and_missing():
    t = synthetic_table(10)
    t.rows[0]["eligible"] = 0
    t.rows[1]["LCD"] = ""
    d = t.dataset("structural", "I2_uptake")
    assert len(d) == 8
    assert "syn00000" not in d.ids and "syn00001" not in d.ids
    assert d.names == schema.STRUCTURAL


# ---------------------------------------------------------------- window / candidates


def test_window_recovers_synthetic_peak():
    rng = np.random.default_rng(0)
    t = synthetic_table(400, seed=2)
    for r in t.rows:
        x = rng.uniform(2, 10)
        r["LCD"] = x
        r["I2_uptake"] = math.exp(-((x - 5) ** 2) / 0.5) + 0.01 * rng.normal()
    ws = window_analysis(t, "LCD", bins=16)
    assert ws.window[0] <= 5 <= ws.window[1]
    assert ws.window[1] - ws.window[0] < 2.0
    assert ws.counts.sum() == 400


def test_window_single_value_collapses_to_one_bin():
    t = synthetic_table(5)
    for r in t.rows:
        r["LCD"] = 7.0
    ws = window_analysis(t, "LCD", bins=10)
    assert len(ws.counts) == 1 and ws.counts[0] == 5


def test_best_window():
    assert best_window(np.array([1.0, 9.5, 10.0, 9.0, 2.0])) == (1, 3)
    assert best_window(np.array([np.nan, 3.0, np.nan])) == (1, 1)


def test_top_candidates_ties_and_k():
    t = synthetic_table(6)
    for r, v in zip(t.rows, [1, 5, 5, 3, 9, 0]):
        r["I2_uptake"] = v
    t.rows[4]["eligible"] = 0
    assert top_candidates(t, 0) == []
    c = top_candidates(t, 3)
    assert [x.id for x in c] == ["syn00001", "syn00002", "syn00003"]
    assert [x.id for x in top_candidates(t, 1, eligible_only=False)] == ["syn00004"]
    assert all(f"Bit_{k}" in schema.header() for k, _ in c[0].bits)


# ---------------------------------------------------------------- training


def test_train_and_explain_outputs(tmp_path):
    t = synthetic_table(200, seed=3)
    cfg = ScreeningConfig(tune=False, seed=1)
    rep = train_and_explain(t, cfg, tmp_path)
    for name in ("models/forest.json", "models/boosted.json", "parity_forest.svg", "shap_ranking_boosted.csv",
                 "shap_values_forest.csv", "pearson_top20_boosted.csv", "pearson_top20_boosted.svg",
                 "metrics.json"):
        assert (tmp_path / name).exists(), name
    summary = json.loads((tmp_path / "metrics.json").read_text())
    assert summary["n_train"] == 160 and summary["n_test"] == 40
    assert rep.metrics["boosted"].r2 > 0.5
    # LCD enters quadratically, so it should rank near the top
    assert "LCD" in summary["top_features"]["boosted"][:5]


def test_nested_feature_sets_do_not_lose_accuracy():
    scores = {k: [] for k in ("structural", "molecular", "chemical")}
    for seed in range(3):
        t = synthetic_table(500, seed=10 + seed)
        for fs in scores:
            tr, te = t.dataset(fs, "I2_uptake").split(0.2, seed)
            scores[fs].append(metrics(te.y, train("boosted", tr, seed=seed).predict(te.X)).r2)
    med = [np.median(scores[k]) for k in ("structural", "molecular", "chemical")]
    assert med[0] <= med[1] <= med[2], med


def test_constant_target_is_degenerate():
    t = synthetic_table(40)
    for r in t.rows:
        r["I2_uptake"] = 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep, _, te = train_models(t, ScreeningConfig(tune=False, feature_set="structural"))
    assert rep.degenerate
    assert np.allclose(rep.models["boosted"].predict(te.X), 2.0)


def test_too_few_rows():
    with pytest.raises(TooFewRows):
        train_models(synthetic_table(19), ScreeningConfig(tune=False))
    with pytest.warns(UserWarning):
        train_models(synthetic_table(30), ScreeningConfig(tune=False, feature_set="structural"))


# ---------------------------------------------------------------- screening and CLI


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    shutil.copy(TOY / "toy_zn_dicarboxylate.cif", d)
    (d / "broken.cif").write_text("data_broken\n_cell_length_a 10\n")
    cfg = d.parent / "fast.txt"
    cfg.write_text(FAST)
    return d, cfg


@pytest.fixture(scope="module")
def screened(corpus, tmp_path_factory):
    d, cfg = corpus
    out = tmp_path_factory.mktemp("out")
    code = main(["screen", "--config", str(cfg), "--input", str(d), "-o", str(out)])
    return code, out


def test_screen_accounts_for_every_input(screened):
    code, out = screened
    assert code == 2
    t = DescriptorTable.read(out / "descriptors.csv")
    assert t.ids == ["toy_zn_dicarboxylate"]
    fails = (out / "failures.log").read_text().splitlines()
    assert len(fails) == 1 and fails[0].startswith("broken\tparse\t")
    rec = json.loads((out / "results" / "toy_zn_dicarboxylate.json").read_text())
    assert rec["gcmc"] and rec["row"]["id"] == "toy_zn_dicarboxylate"


def test_table_rebuilt_from_records(screened, tmp_path):
    _, out = screened
    assert main(["table", str(out / "results"), "-o", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").read_bytes() == (out / "descriptors.csv").read_bytes()


def test_screen_in_process_matches_cli(corpus, screened, tmp_path):
    d, cfg = corpus
    res = screen(load_config(cfg, input_dir=str(d), output_dir=str(tmp_path)))
    assert res.exit_code == 2 and res.n_inputs == 2
    assert (tmp_path / "descriptors.csv").read_bytes() == (screened[1] / "descriptors.csv").read_bytes()


def test_cli_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("no_such_key = 1\n")
    assert main(["screen", "--config", str(bad), "--input", str(tmp_path)]) == 1
    assert "configuration error" in capsys.readouterr().err
    assert main(["train", "--table", str(tmp_path / "none.csv"), "-o", str(tmp_path)]) == 1


def test_cli_descriptors(corpus, tmp_path):
    d, cfg = corpus
    out = tmp_path / "d.csv"
    code = main(["descriptors", str(d), "-o", str(out), "--config", str(cfg),
                 "--dump-graph", str(tmp_path / "g")])
    assert code == 2
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("toy_zn_dicarboxylate,")
    assert (tmp_path / "g" / "toy_zn_dicarboxylate.graph.txt").exists()


def test_cli_report_and_train(tmp_path):
    p = tmp_path / "t.csv"
    synthetic_table(60, seed=4).write(p)
    assert main(["report", "--table", str(p), "-o", str(tmp_path / "rep"), "--top-k", "3"]) == 0
    assert (tmp_path / "rep" / "window_LCD.csv").exists()
    assert len((tmp_path / "rep" / "top_candidates.csv").read_text().splitlines()) == 4
    assert main(["train", "--table", str(p), "-o", str(tmp_path / "ml"), "--no-tune",
                 "--feature-set", "structural"]) == 0
    model = tmp_path / "ml" / "models" / "boosted.json"
    assert main(["explain", "--table", str(p), "--model", str(model), "-o", str(tmp_path / "ex"),
                 "--feature-set", "structural"]) == 0
    assert main(["explain", "--table", str(p), "--model", str(model), "-o", str(tmp_path / "ex"),
                 "--feature-set", "chemical"]) == 1
