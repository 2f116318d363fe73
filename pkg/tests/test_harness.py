import csv
import json
import shutil

import pytest

from fbne import cli, harness
from fbne.bif import load_bif
from fbne.data import load_csv
from fbne.harness import (
    ScenarioConfig,
    cell_hash,
    expand_grid,
    parse_summary,
    rank_marks,
    run_grid,
    run_scenario,
)

ASIA = {
    "name": "asia",
    "dataset": {"source": "builtin-asia", "n": 1200, "seed": 1},
    "class_column": "lung",
    "split": {"kind": "vertical", "n_parties": 2},
    "repeats": 1,
    "folds": 5,
    "seed": 3,
}


def test_config_roundtrip_and_validation():
    cfg = ScenarioConfig.from_dict(ASIA)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({**ASIA, "missing_level": 0.2})
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({**ASIA, "repeats": 0})
    with pytest.raises(TypeError):
        ScenarioConfig.from_dict({k: v for k, v in ASIA.items() if k != "class_column"})


def test_run_twice_byte_identical(tmp_path):
    for d in ("a", "b"):
        run_scenario({**ASIA, "output": str(tmp_path / d)})
    for f in ("results.csv", "summary.txt", "config.json", "models/party-1.bif", "models/party-2.bif"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "timings.csv").exists()


def test_one_row_five_model_columns(tmp_path):
    res = run_scenario({**ASIA, "output": str(tmp_path)})
    head, _, row = (tmp_path / "summary.txt").read_text().splitlines()[:3]
    assert head.split(" | ")[2:] == ["FBNE", "Party 1", "Party 2", "Central", "VertiBayes"]
    assert len(row.split(" | ")) == 7
    assert len(res.models) == 5


def test_summary_matches_csv(tmp_path):
    run_scenario({**ASIA, "missing_level": 0.1, "output": str(tmp_path)})
    table = parse_summary((tmp_path / "summary.txt").read_text())
    rows = list(csv.DictReader(open(tmp_path / "results.csv")))
    shown = table[("asia", "0.1")]
    for r in rows:
        assert shown[harness.display_name(r["model"])] == float(r["auc_mean"])


def test_members_exported_as_bif(tmp_path):
    run_scenario({**ASIA, "output": str(tmp_path)})
    nets = [load_bif(tmp_path / "models" / f"party-{k}.bif") for k in (1, 2)]
    assert all("lung" in n.names for n in nets)
    assert set(nets[0].names) & set(nets[1].names) == {"lung"}


def test_iris_three_party_vertical_skipped(tmp_path):
    res = run_scenario({
        "name": "iris", "dataset": {"source": "csv", "path": "iris"}, "class_column": "species",
        "split": {"kind": "vertical", "n_parties": 3}, "repeats": 1, "output": str(tmp_path),
    })
    assert res.skipped and "cannot" in res.skipped
    assert "skipped" in (tmp_path / "summary.txt").read_text()
    assert "cannot" in (tmp_path / "results.csv").read_text()


def test_rank_marks():
    assert rank_marks([0.9, 0.99, 0.99, 0.95]) == ["", "*", "*", "†"]
    assert rank_marks([0.5]) == ["*"]


def test_grid_expansion_and_resume(tmp_path):
    grid = {
        "base": {"repeats": 1, "folds": 3, "seed": 1},
        "axes": {
            "dataset": [{"name": "asia", "dataset": {"source": "builtin-asia", "n": 600, "seed": 2},
                         "class_column": "either"}],
            "split": [{"kind": "vertical"}, {"kind": "horizontal"}],
            "bias": [0.5, 0.95],
            "missing_level": [0.0, 0.05],
        },
    }
    cells = expand_grid(grid)
    assert len(cells) == 6
    assert len({cell_hash(c) for c in cells}) == 6
    root = run_grid(grid, tmp_path, jobs=1)
    stamps = {p: p.stat().st_mtime_ns for p in root.glob("cells/*/results.csv")}
    assert len(stamps) == 6
    summary = (root / "summary_asia.txt").read_text()
    assert summary.count("\n") >= 8
    run_grid(grid, tmp_path, jobs=1)
    assert {p: p.stat().st_mtime_ns for p in root.glob("cells/*/results.csv")} == stamps


def test_cli_commands(tmp_path, capsys):
    out = tmp_path / "asia.csv"
    assert cli.main(["gen-asia", "--n", "300", "--seed", "4", "--out", str(out)]) == 0
    t = load_csv(out)
    assert t.n_rows == 300 and len(t.columns) == 8

    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**ASIA, "output": str(tmp_path / "run")}))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert "FBNE" in capsys.readouterr().out

    assert cli.main(["inspect-model", str(tmp_path / "run" / "models" / "party-1.bif")]) == 0
    assert "free parameters" in capsys.readouterr().out

    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"base": {**ASIA, "folds": 3}, "axes": {"missing_level": [0.0]}}))
    assert cli.main(["grid", "--config", str(grid), "--output", str(tmp_path / "grid"), "--jobs", "2"]) == 0
    assert (tmp_path / "grid" / "summary_asia.txt").exists()


def test_fixture_dir_env_override(tmp_path, monkeypatch):
    shutil.copy(harness.fixtures_dir() / "iris.csv", tmp_path / "flowers.csv")
    monkeypatch.setenv(harness.FIXTURES_ENV, str(tmp_path))
    assert harness.resolve_fixture("flowers") == tmp_path / "flowers.csv"
    with pytest.raises(FileNotFoundError):
        harness.resolve_fixture("alarm")
