"""Command-line interface: outputs, manifests, exit codes, reproducibility."""
import csv
import hashlib
import json
import math

import pytest

from conftest import TG_CV
from malthus.cli import main


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --- age-model commands ----------------------------------------------------------


def test_age_curve_two_point_values(tmp_path):
    out = tmp_path / "curve.csv"
    rc = main([
        "age-curve", "--beta", "0", "--alpha", "1.0",
        "--baseline", "twopoint(0.5,1.5)", "--out", str(out),
    ])
    assert rc == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["beta", "alpha", "cv", "lambda", "lambda_reference", "solver_status"]
    assert len(rows) == 2  # degenerate anchor + requested point
    anchor, point = rows
    assert float(anchor["alpha"]) == 0.0 and float(anchor["cv"]) == 0.0
    assert abs(float(anchor["lambda"]) - 1.0) < 1e-9
    assert point["lambda"] == "0.8660254038"  # 10 significant digits
    assert abs(float(point["lambda"]) - math.sqrt(0.75)) < 1e-9
    for r in rows:
        assert abs(float(r["lambda_reference"]) - 1.0) < 1e-9
        assert r["solver_status"] == "ok"


def test_age_curve_multiple_betas(tmp_path):
    out = tmp_path / "curve.csv"
    assert main([
        "age-curve", "--beta", "1", "2", "--lag", "1", "--alpha", "0.2", "0.4",
        "--out", str(out),
    ]) == 0
    rows = read_csv(out)
    assert len(rows) == 6
    assert [float(r["beta"]) for r in rows] == [1, 1, 1, 2, 2, 2]
    for r in rows:
        assert abs(float(r["cv"]) - float(r["alpha"]) * TG_CV) < 1e-9


def test_age_curve_window_flags_require_gauss(tmp_path):
    rc = main([
        "age-curve", "--beta", "0", "--alpha", "0.5", "--baseline",
        "twopoint(0.5,1.5)", "--vmin", "0.1", "--out", str(tmp_path / "x.csv"),
    ])
    assert rc == 2


def test_age_perturb_rows(tmp_path):
    out = tmp_path / "perturb.csv"
    rc = main(["age-perturb", "--b-const", "1.0", "--alphas", "0.2", "0.1", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out)
    assert [float(r["alpha"]) for r in rows] == [0.0, 0.1, 0.2]
    zero = rows[0]
    assert float(zero["lambda_exact"]) == float(zero["lambda_quadratic_approx"]) == 1.0
    assert float(zero["residual"]) == 0.0 and float(zero["dlambda_dalpha"]) == 0.0
    d2 = {r["d2_at_zero"] for r in rows}
    assert len(d2) == 1 and float(d2.pop()) < 0.0
    for r in rows[1:]:
        assert float(r["lambda_exact"]) < 1.0  # variability lowers the exponent
        assert abs(float(r["residual"])) < 1e-3
        assert float(r["dlambda_dalpha"]) < 0.0


# --- size-model commands ---------------------------------------------------------


CFG = "rows=0.4:5,0.2:4.5\nM=4\nseed=9\n"


def test_size_mc_output_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path, "# comment line\n" + CFG)
    out = tmp_path / "table.csv"
    assert main(["size-mc", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["cv", "alpha", "T", "mean", "sd", "ci_low", "ci_high",
                             "pop_mean", "pop_min", "pop_max"]
    assert [float(r["alpha"]) for r in rows] == [0.4, 0.2]
    assert [float(r["T"]) for r in rows] == [5.0, 4.5]
    for r in rows:
        assert abs(float(r["cv"]) - float(r["alpha"]) * TG_CV) < 1e-9
        assert float(r["ci_low"]) <= float(r["mean"]) <= float(r["ci_high"])
        assert float(r["pop_min"]) > 0

    man = json.loads((tmp_path / "table.csv.manifest.json").read_text())
    assert man["command"] == "size-mc"
    assert man["seed"] == 9
    assert "rows=0.4:5,0.2:4.5" in man["config"]
    assert "estimator=biomass" in man["config"]  # defaults are resolved into the manifest
    digest = hashlib.sha256(out.read_bytes()).hexdigest()
    assert man["outputs"][str(out)] == digest
    assert man["started"] <= man["finished"]


def test_size_mc_rerun_is_byte_identical(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, CFG)
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    monkeypatch.setenv("MALTHUS_THREADS", "1")
    assert main(["size-mc", "--config", cfg, "--out", str(a)]) == 0
    assert main(["size-mc", "--config", cfg, "--out", str(b)]) == 0
    monkeypatch.setenv("MALTHUS_THREADS", "2")
    assert main(["size-mc", "--config", cfg, "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()


def test_size_mc_set_overrides(tmp_path):
    cfg = write_cfg(tmp_path, CFG)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["size-mc", "--config", cfg, "--out", str(a)]) == 0
    assert main(["size-mc", "--config", cfg, "--set", "seed=10", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()
    man = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert man["seed"] == 10


def test_size_mc_config_errors(tmp_path):
    out = str(tmp_path / "x.csv")
    cfg = write_cfg(tmp_path, CFG)
    assert main(["size-mc", "--out", out]) == 2  # defaults carry no rows
    assert main(["size-mc", "--config", str(tmp_path / "nope.cfg"), "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "growth=cubic", "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "kernel=ar:1.5", "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "division.x0=-1", "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "M", "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "rows=0.4:-1", "--out", out]) == 2
    assert main(["size-mc", "--config", cfg, "--set", "M=1", "--out", out]) == 2
    bad = write_cfg(tmp_path, "rows 0.4:5\n", name="bad.cfg")
    assert main(["size-mc", "--config", bad, "--out", out]) == 2


def test_size_mc_alternative_laws_run(tmp_path):
    cfg = write_cfg(tmp_path, "rows=0.5:4\nM=3\nseed=2\nbaseline=uniform:0.4,1.6\nkernel=ar:0.5\nsplit=asym:0.2\n")
    out = tmp_path / "u.csv"
    assert main(["size-mc", "--config", cfg, "--out", str(out)]) == 0
    [row] = read_csv(out)
    assert float(row["pop_min"]) > 0


def test_tree_dump_genealogy(tmp_path):
    out = tmp_path / "tree.csv"
    assert main(["tree-dump", "--alpha", "0", "--horizon", "4", "--seed", "3",
                 "--stream", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["id_path", "parent_path", "b", "zeta", "xi", "tau", "d"]
    assert rows[0]["id_path"] == "" and rows[0]["parent_path"] == ""
    assert float(rows[0]["b"]) == 0.0
    paths = [r["id_path"] for r in rows]
    assert len(set(paths)) == len(paths) > 3
    for r in rows[1:]:
        assert r["id_path"][:-1] == r["parent_path"]
        assert r["id_path"][-1] in "01"
        assert abs(float(r["d"]) - float(r["b"]) - float(r["zeta"])) < 1e-8


def test_estimator_compare_output(tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["estimator-compare", "--alpha", "0.3", "--horizons", "5", "6",
                 "--m", "4", "--seed", "2", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["T", "sd_biomass", "sd_count"]
    assert [float(r["T"]) for r in rows] == [5.0, 6.0]
    for r in rows:
        assert float(r["sd_biomass"]) > 0 and float(r["sd_count"]) > 0


# --- driver ----------------------------------------------------------------------


def test_unknown_command_and_help(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(["--help"]) == 0
    assert main(["size-mc", "--help"]) == 0
    capsys.readouterr()
