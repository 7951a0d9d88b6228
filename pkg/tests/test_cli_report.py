import csv
import json
import shutil
from pathlib import Path

import pytest

from flexdse.cli import load_experiment, main
from flexdse.fixtures import FIXTURE_DIR, tiny_base
from flexdse.report import fmt, to_csv

EXP_DIR = FIXTURE_DIR / "experiments"


def _rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# schema: ")
    return list(csv.reader(lines[1:]))


def test_fmt_precision():
    from fractions import Fraction
    assert fmt(Fraction(1, 3)) == "0.333333" and fmt(7) == "7" and fmt(None) == ""


def test_csv_header_is_versioned():
    assert to_csv("t", ["a"], [[1]]).splitlines() == ["# schema: t v1", "a", "1"]


def test_flexion_command(tmp_path, capsys):
    model = tmp_path / "m.json"
    model.write_text((FIXTURE_DIR / "models" / "tiny_gemm.json").read_text())
    accel = tmp_path / "a.json"
    accel.write_text(json.dumps(tiny_base().to_dict()))
    assert main(["flexion", "--model", str(model), "--accel", str(accel), "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "flexion.csv")
    assert len(rows) == 1 + 3
    doc = json.loads((tmp_path / "o" / "flexion.json").read_text())
    assert doc["accelerator"]["name"] == "InFlex-0000"
    assert main(["flexion", "--model", "tiny_gemm", "--accel", "tiny_inflex_0000", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("# schema: flexion v1")


def test_missing_file_exit_1_without_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["flexion", "--model", str(tmp_path / "nope.json"), "--accel", "tiny_inflex_0000",
                 "--out", str(out)]) == 1
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_invalid_content_exit_1(tmp_path):
    bad = tmp_path / "a.json"
    d = tiny_base().to_dict()
    d["n_pe"] = 1
    bad.write_text(json.dumps(d))
    assert main(["flexion", "--model", "tiny_gemm", "--accel", str(bad)]) == 1


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["flexion", "--model", "a", "--accel", "b", "--bogus"])
    assert exc.value.code == 2


def test_runtime_error_exit_2(tmp_path):
    # exhaustive mode on a space above the cap is a runtime failure, not bad input
    assert main(["mse", "--model", "toy_cnn", "--accel", "full_fullflex_1111", "--mode", "exhaustive",
                 "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_mse_command(tmp_path):
    assert main(["mse", "--model", "tiny_gemm", "--accel", "tiny_fullflex_1111", "--population", "20",
                 "--generations", "5", "--seed", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "mse.json").read_text())
    assert doc["config"]["seed"] == 3 and len(doc["layers"]) == 3
    hist = _rows(tmp_path / "history.csv")
    assert hist[0] == ["layer", "generation", "best_objective"] and len(hist) == 1 + 3 * 5


def test_dse_and_report(tmp_path):
    out = tmp_path / "r"
    assert main(["dse", "--experiment", str(EXP_DIR / "tiny_axis_O.json"), "--out", str(out)]) == 0
    for name in ("result.json", "matrix.csv", "summary.csv", "venn.csv", "layers.csv"):
        assert (out / name).exists()
    assert sorted(p.name for p in (out / "variants").iterdir()) == [
        "FullFlex-0100.json", "InFlex-0000.json", "PartFlex-0100.json"]
    res = json.loads((out / "result.json").read_text())
    assert res["experiment"]["seed"] == 7 and res["experiment"]["ga"]["population"] == 100
    for row in _rows(out / "venn.csv")[1:]:
        assert int(row[5]) <= int(row[4])
    assert main(["report", str(out), "--out", str(tmp_path / "rep")]) == 0
    text = (tmp_path / "rep" / "report.csv").read_text()
    assert "metric=runtime" in text and "geomean" in text
    matrix = _rows(out / "matrix.csv")
    idx = matrix[0].index("InFlex-0000")
    assert all(r[idx] == "1.000000" for r in matrix[1:])
    assert all(float(v) <= 1 for r in matrix[1:] for v in r[1:])


def test_report_single_variant_is_ones(tmp_path):
    exp = tmp_path / "e.json"
    exp.write_text(json.dumps({"kind": "class_sweep", "models": ["tiny_gemm"], "accel": "tiny_inflex_0000",
                               "classes": ["1111"], "mode": "exhaustive"}))
    assert main(["dse", "--experiment", str(exp), "--out", str(tmp_path / "r")]) == 0
    assert main(["report", str(tmp_path / "r"), "--out", str(tmp_path / "o")]) == 0
    for line in (tmp_path / "o" / "report.csv").read_text().splitlines():
        if line.startswith(("tiny_gemm", "geomean")):
            assert set(line.split(",")[1:]) == {"1.000000"}


def test_report_rejects_other_versions(tmp_path):
    (tmp_path / "result.json").write_text(json.dumps({"version": 99}))
    assert main(["report", str(tmp_path)]) == 1


def test_experiment_refs_relative_to_file(tmp_path):
    shutil.copy(FIXTURE_DIR / "models" / "tiny_cnn.json", tmp_path / "net.json")
    (tmp_path / "acc.json").write_text(json.dumps(tiny_base().to_dict()))
    (tmp_path / "e.json").write_text(json.dumps(
        {"kind": "axis_isolation", "axis": "T", "models": ["net.json"], "accel": "acc.json"}))
    exp = load_experiment(tmp_path / "e.json")
    assert exp.models[0].name == "tiny_cnn" and exp.config["mode"] == "auto"


def test_experiment_unknown_field(tmp_path):
    (tmp_path / "e.json").write_text(json.dumps({"kind": "class_sweep", "models": ["tiny_gemm"],
                                                  "accel": "tiny_inflex_0000", "extra": 1}))
    assert main(["dse", "--experiment", str(tmp_path / "e.json"), "--out", str(tmp_path / "o")]) == 1


def test_cost_table_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FLEXDSE_COST_TABLE", str(tmp_path / "missing.json"))
    assert main(["mse", "--model", "tiny_gemm", "--accel", "tiny_inflex_0000", "--mode", "exhaustive",
                 "--out", str(tmp_path / "o")]) == 1
    monkeypatch.setenv("FLEXDSE_COST_TABLE", str(FIXTURE_DIR / "cost_table.json"))
    assert main(["mse", "--model", "tiny_gemm", "--accel", "tiny_inflex_0000", "--mode", "exhaustive",
                 "--out", str(tmp_path / "o")]) == 0
