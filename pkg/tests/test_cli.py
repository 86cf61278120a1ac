"""The koradial command: config handling, exit codes, outputs, determinism."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from conftest import CONFIG_DIR
from koradial.cli import EXIT, ConfigError, load_config, main

MANUFACTURED = str(CONFIG_DIR / "manufactured.toml")
ZERO_WEIGHTS = str(CONFIG_DIR / "zero-weights.toml")
POWER_LARGE = str(CONFIG_DIR / "power-large.toml")


def write_config(tmp_path: Path, body: str, name: str = "case.toml") -> str:
    path = tmp_path / name
    path.write_text(body)
    return str(path)


BLOWUP_CONFIG = """
[problem]
N = 3
a = 1.0
b = 1.0
p1 = "1"
p2 = "1"
f1 = "x^3"
f2 = "x^3"
h1 = "x^3"
h2 = "x^3"
w1 = "x^3"
w2 = "x^3"

[numerics]
R_max = 20.0
"""


# ---------------------------------------------------------------------------
# config loading


def test_load_catalog_config():
    cfg = load_config(MANUFACTURED)
    assert cfg.spec.n_dim == 3 and cfg.spec.b == 2.0
    assert cfg.numerics.r_max == 10.0
    assert cfg.spec.p1(2.0) == pytest.approx(1.0)


def test_load_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/xyz.toml")


def test_load_missing_key(tmp_path):
    path = write_config(tmp_path, "[problem]\nN = 3\n")
    with pytest.raises(ConfigError, match="missing required key 'a'"):
        load_config(path)


def test_load_bad_expression_offset(tmp_path):
    body = BLOWUP_CONFIG.replace('f1 = "x^3"', 'f1 = "x^"')
    path = write_config(tmp_path, body)
    with pytest.raises(ConfigError, match="offset 2"):
        load_config(path)


def test_load_unknown_numerics_key(tmp_path):
    path = write_config(tmp_path, BLOWUP_CONFIG + "bogus_knob = 3\n")
    with pytest.raises(ConfigError, match="unknown key 'bogus_knob'"):
        load_config(path)


def test_set_override_binds_parameter():
    cfg = load_config(POWER_LARGE, {"alpha": 2.0})
    assert cfg.spec.f1(3.0) == pytest.approx(9.0)


def test_invalid_toml(tmp_path):
    path = write_config(tmp_path, "not toml [ at all")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(path)


def test_even_nodes_per_panel_rejected(tmp_path):
    path = write_config(tmp_path, BLOWUP_CONFIG + "nodes_per_panel = 8\n")
    with pytest.raises(ConfigError, match="odd"):
        load_config(path)


def test_non_integer_count_rejected(tmp_path):
    path = write_config(tmp_path, BLOWUP_CONFIG + "max_iter = 3.5\n")
    with pytest.raises(ConfigError, match="integer"):
        load_config(path)


def test_expression_domain_error_on_grid_is_config_error(tmp_path):
    # parses fine, but p1 cannot be evaluated at the r = 0 node
    body = BLOWUP_CONFIG.replace('p1 = "1"', 'p1 = "1/x"')
    path = write_config(tmp_path, body)
    assert main(["solve", path, "--out", str(tmp_path)]) == EXIT["config"]


# ---------------------------------------------------------------------------
# check


def test_cmd_check_catalog_passes(tmp_path):
    assert main(["check", POWER_LARGE, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "check_report.json").read_text())
    assert report["all_passed"]


def test_cmd_check_offset_nonlinearity_fails(tmp_path):
    body = BLOWUP_CONFIG.replace('f1 = "x^3"', 'f1 = "1+x"')
    path = write_config(tmp_path, body)
    assert main(["check", path, "--out", str(tmp_path)]) == EXIT["hypothesis"]
    report = json.loads((tmp_path / "check_report.json").read_text())
    failing = [e for e in report["entries"] if e["status"] == "fail"]
    assert any(
        e["name"] == "C1:f1" and e["witness"]["value"] == pytest.approx(1.0)
        for e in failing
    )


def test_cmd_check_malformed_expression_is_config_error(tmp_path):
    body = BLOWUP_CONFIG.replace('f1 = "x^3"', 'f1 = "x^"')
    path = write_config(tmp_path, body)
    assert main(["check", path, "--out", str(tmp_path)]) == EXIT["config"]


def test_cmd_check_indeterminate_exit(tmp_path):
    # f1 evaluates fine at b but fails on part of the sampling range,
    # so its C1 entry is indeterminate rather than failed
    body = BLOWUP_CONFIG.replace('f1 = "x^3"', 'f1 = "sqrt(x-0.5)"')
    path = write_config(tmp_path, body)
    assert main(["check", path, "--out", str(tmp_path)]) == EXIT["indeterminate"]
    report = json.loads((tmp_path / "check_report.json").read_text())
    statuses = {e["name"]: e["status"] for e in report["entries"]}
    assert statuses["C1:f1"] == "indeterminate"


# ---------------------------------------------------------------------------
# solve


def test_cmd_solve_zero_weights(tmp_path):
    assert main(["solve", ZERO_WEIGHTS, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "solution.csv").open()))
    assert all(float(r["u1"]) == 1.0 and float(r["u2"]) == 1.0 for r in rows)
    manifest = json.loads((tmp_path / "solve_manifest.json").read_text())
    assert manifest["converged"] and manifest["iterations"] == 1


def test_cmd_solve_manufactured_matches_exact(tmp_path):
    assert main(["solve", MANUFACTURED, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "solution.csv").open()))
    for row in rows:
        r, u1, u2 = (float(row[k]) for k in ("r", "u1", "u2"))
        assert u1 == pytest.approx(1 + r * r, rel=1e-4)
        assert u2 == pytest.approx(2 + r * r, rel=1e-4)
    manifest = json.loads((tmp_path / "solve_manifest.json").read_text())
    assert max(manifest["residuals"]) <= 1e-6


def test_cmd_solve_blowup_exit_and_radius(tmp_path):
    path = write_config(tmp_path, BLOWUP_CONFIG)
    assert main(["solve", path, "--out", str(tmp_path)]) == EXIT["blow_up"]
    manifest = json.loads((tmp_path / "solve_manifest.json").read_text())
    assert manifest["blow_up_radius"] is not None
    assert 1.0 < manifest["blow_up_radius"] <= 20.0


# ---------------------------------------------------------------------------
# classify


def test_cmd_classify_power_large(tmp_path):
    assert main(["classify", POWER_LARGE, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "classification.json").read_text())
    assert report["predicted_behavior"] == "I"
    assert report["gate"]["regime"] == "H_INF_BOTH"
    assert report["dichotomy"]["kind"] == "I"
    assert report["dichotomy"]["verdicts"]["P1"]["kind"] == "divergent"


def test_cmd_classify_indeterminate_exit(tmp_path):
    # steep decay breaks the weight side-condition: honest exit 3
    body = BLOWUP_CONFIG.replace('"x^3"', '"x^0.5"').replace(
        'p1 = "1"', 'p1 = "(1+x)^-6"'
    ).replace('p2 = "1"', 'p2 = "(1+x)^-6"')
    path = write_config(tmp_path, body)
    assert main(["classify", path, "--out", str(tmp_path)]) == EXIT["indeterminate"]


# ---------------------------------------------------------------------------
# bounds


def test_cmd_bounds_zero_weights(tmp_path):
    assert main(["bounds", ZERO_WEIGHTS, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "bounds.json").read_text())
    assert report["passed"]
    rows = list(csv.DictReader((tmp_path / "bounds_margins.csv").open()))
    assert all(float(r["lower1"]) == 0.0 and float(r["upper1"]) == 0.0 for r in rows)


def test_cmd_bounds_corrupted_solution_injected(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", ZERO_WEIGHTS, "--out", str(out)]) == 0
    sol = (out / "solution.csv").read_text().splitlines()
    head, body = sol[0], sol[1:]
    corrupted = [head]
    for line in body:
        r, u1, u2 = line.split(",")
        corrupted.append(f"{r},{float(u1) + 7.0},{u2}")
    bad = tmp_path / "bad_solution.csv"
    bad.write_text("\n".join(corrupted) + "\n")
    code = main(["bounds", ZERO_WEIGHTS, "--out", str(out), "--solution", str(bad)])
    assert code == EXIT["bounds"]


def test_cmd_bounds_solution_grid_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("r,u1,u2\n0,1,1\n")
    code = main(["bounds", ZERO_WEIGHTS, "--out", str(tmp_path), "--solution", str(bad)])
    assert code == EXIT["config"]


# ---------------------------------------------------------------------------
# report


def test_cmd_report_zero_weights(tmp_path):
    assert main(["report", ZERO_WEIGHTS, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["worst_exit"] == 0
    assert doc["classification"]["predicted_behavior"] == "F"
    assert doc["bounds"]["passed"]
    profiles = tmp_path / "profiles"
    expected = {f"functional_{t}.csv" for t in
                ("G1", "G2", "P1", "Q1", "P2", "Q2", "P3", "Q3", "H1", "H2")}
    assert expected <= {p.name for p in profiles.iterdir()}
    for name in ("functional_P1.csv", "functional_H1.csv"):
        rows = list(csv.DictReader((profiles / name).open()))
        vals = [float(r["value"]) for r in rows]
        assert vals[0] == 0.0
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_cmd_report_worst_exit_aggregates(tmp_path):
    path = write_config(tmp_path, BLOWUP_CONFIG)
    code = main(["report", path, "--out", str(tmp_path)])
    assert code == EXIT["blow_up"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["exit_codes"]["solve"] == EXIT["blow_up"]
    assert doc["bounds"] == {"skipped": "no converged solution"}


def test_report_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["report", ZERO_WEIGHTS, "--out", str(out1)]) == 0
    assert main(["report", ZERO_WEIGHTS, "--out", str(out2)]) == 0
    files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
    assert files1 == files2
    for rel in files1:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel


def test_csv_17_digit_roundtrip(tmp_path):
    assert main(["solve", MANUFACTURED, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "solution.csv").read_text().splitlines()
    assert lines[0] == "r,u1,u2"
    # %.17g strings reparse to the exact binary doubles
    r, u1, u2 = lines[5].split(",")
    assert float(u1) == float(f"{float(u1):.17g}")


def test_bad_set_flag_is_config_error(tmp_path):
    assert main(["solve", MANUFACTURED, "--set", "alpha", "--out", str(tmp_path)]) == 1
    assert main(["solve", MANUFACTURED, "--set", "alpha=x", "--out", str(tmp_path)]) == 1


def test_json_only_formats_skip_csv(tmp_path):
    body = BLOWUP_CONFIG.replace('"x^3"', '"x"') + '\n[output]\nformats = ["json"]\n'
    path = write_config(tmp_path, body)
    out = tmp_path / "out"
    assert main(["report", path, "--out", str(out)]) == 0
    names = {p.name for p in out.rglob("*") if p.is_file()}
    assert "report.json" in names
    assert not any(n.endswith(".csv") for n in names)


def test_report_nonconverged_exit(tmp_path):
    body = BLOWUP_CONFIG.replace('"x^3"', '"x^0.5"') + "max_iter = 2\ntol = 1e-14\n"
    path = write_config(tmp_path, body)
    code = main(["report", path, "--out", str(tmp_path / "out")])
    assert code == EXIT["no_convergence"]
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["solve"]["converged"] is False
    assert doc["exit_codes"]["solve"] == EXIT["no_convergence"]


def test_catalog_runs_end_to_end_under_60s(tmp_path):
    import time

    names = ["power-large", "power-bounded", "semifinite-1", "semifinite-2",
             "manufactured", "zero-weights"]
    t0 = time.perf_counter()
    for name in names:
        code = main(["report", str(CONFIG_DIR / f"{name}.toml"), "--out", str(tmp_path / name)])
        assert code == 0, name
    assert time.perf_counter() - t0 < 60.0
