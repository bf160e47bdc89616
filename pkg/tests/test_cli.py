import json
import subprocess
import sys

import pytest

from doubleseries import __version__
from doubleseries.cli import COLUMNS, main

HEADER = ",".join(COLUMNS)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(csv_text):
    lines = csv_text.rstrip("\n").split("\n")
    assert lines[0] == HEADER
    return [dict(zip(COLUMNS, line.split(","))) for line in lines[1:]]


def test_constant_thm41(capsys):
    code, out, err = run(["constant", "--family", "thm4.1", "--p", "0.5", "--r", "1", "--s", "0", "--max-m", "1e6"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["estimate"]) == pytest.approx(1.9985, abs=1e-4)
    assert float(row["claimed"]) == 2.0 and row["pass"] == "true"
    assert '"version": "0.1.0"' in err


def test_constant_thm43(capsys):
    code, out, _ = run(["constant", "--family", "thm4.3", "--alpha", "1", "--beta", "0.5", "--p", "0.5", "--max-m", "1000"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["estimate"]) == 1.0 and row["m_or_n"] == "1"


def test_constant_domain_error_exit_2(capsys):
    code, out, err = run(["constant", "--family", "thm4.4", "--p", "0.5", "--s", "0.5", "--r", "1"], capsys)
    assert code == 2 and out == ""
    assert "1 <= s < r < 1/p" in err


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["constant", "--max-m", "abc"])
    assert exc.value.code == 2


def test_verify_pass_and_override(capsys):
    code, out, _ = run(["verify", "--family", "thm4.5", "--p", "0.5", "--r", "1", "--s", "0.5", "--trials", "1000", "--seed", "7"], capsys)
    assert code == 0 and rows(out)[0]["pass"] == "true"
    code, out, _ = run(["verify", "--family", "thm4.1", "--p", "0.5", "--r", "1", "--s", "0", "--constant-override", "1.0"], capsys)
    assert code == 1 and float(rows(out)[0]["gap"]) > 0
    code, _, _ = run(["verify", "--family", "thm4.2", "--p", "0.5", "--r", "-2", "--s", "-4", "--trials", "500"], capsys)
    assert code == 0


def test_verify_output_identical_across_workers(tmp_path, capsys):
    base = ["verify", "--family", "cor4.1", "--p", "0.5", "--alpha", "1.5", "--beta", "1", "--trials", "300"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--output", str(a)]) == 0
    assert main(base + ["--output", str(b), "--workers", "4"]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    sidecar = json.loads((tmp_path / "a.csv.config.json").read_text())
    assert sidecar["config"]["seed"] == 42 and sidecar["version"] == __version__


def test_json_report_structure(capsys):
    code, out, _ = run(["sharpness", "--family", "thm4.1", "--p", "0.5", "--r", "1", "--s", "0", "--max-m", "10000", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"version", "config", "rows", "summary"}
    assert doc["config"]["trials"] == 1000 and doc["config"]["slack"] == 1e-9
    assert [r["m_or_n"] for r in doc["rows"]] == [1, 10, 100, 1000, 10000]
    assert set(doc["rows"][0]) == set(COLUMNS)


def test_seventeen_significant_digits(capsys):
    _, out, _ = run(["sharpness", "--family", "thm4.1", "--p", "0.5", "--r", "1", "--s", "0", "--m", "2"], capsys)
    est = rows(out)[0]["estimate"]
    assert float(est) == pytest.approx((1 + 0.5**0.5) / 2**0.5, rel=1e-16)
    assert len(est.replace(".", "").lstrip("0")) >= 16


def test_lemma_grid_22(capsys):
    code, out, _ = run(["lemma", "--which", "2.2", "--grid", "default"], capsys)
    assert code == 0
    rs = rows(out)
    ratio = [r for r in rs if r["family"] == "lemma2.2/ratio"]
    assert ratio and all(float(r["margin"]) > 0 for r in ratio)


def test_lemma_grid_23_equality_at_two(capsys):
    code, out, _ = run(["lemma", "--which", "2.3"], capsys)
    assert code == 0
    high = [r for r in rows(out) if r["family"] == "lemma2.3/high" and r["m_or_n"] == "2"]
    assert high and all(float(r["margin"]) == 0.0 for r in high)


def test_malformed_grid_exit_2_names_line(tmp_path, capsys):
    g = tmp_path / "bad.grid"
    g.write_text("[common]\nn = 1..10\n[lemma2.1]\nr_ineq_2_1 = 0:1\n")
    code, _, err = run(["lemma", "--which", "2.1", "--grid", str(g)], capsys)
    assert code == 2 and "line 4" in err


def test_majorize(capsys):
    code, out, _ = run(["majorize", "--kind", "thm4.3", "--alpha", "1", "--beta", "0.5", "--n-max", "1000"], capsys)
    assert code == 0
    rs = rows(out)
    assert all(r["pass"] == "true" for r in rs)
    assert sum(r["family"] == "thm_4_3" for r in rs) == 1000


def test_majorize_thm45_needs_parameters(capsys):
    code, _, err = run(["majorize", "--kind", "thm4.5", "--r", "1"], capsys)
    assert code == 2 and "--s" in err


def test_atlas_rows_and_order(capsys):
    code, out, _ = run(["atlas", "--family", "thm4.1", "--p", "0.5,0.25", "--s", "0", "--r", "1,0.5"], capsys)
    assert code == 0
    rs = rows(out)
    assert [(r["p"], r["r"]) for r in rs] == [("0.25", "0.5"), ("0.25", "1"), ("0.5", "0.5"), ("0.5", "1")]
    assert all(float(r["gap"]) < 0.01 for r in rs)


def test_atlas_empty_and_single(capsys):
    code, out, _ = run(["atlas", "--family", "thm4.1", "--p", "", "--s", "0", "--r", "1"], capsys)
    assert code == 0 and out == HEADER + "\n"
    code, out, _ = run(["atlas", "--family", "thm4.1", "--p", "0.5", "--s", "0", "--r", "1", "--max-m", "1000"], capsys)
    assert code == 0 and len(rows(out)) == 1


def test_atlas_skips_points_outside_domain(capsys):
    code, out, _ = run(["atlas", "--family", "thm4.1", "--p", "0.5", "--s", "0,3", "--r", "1", "--max-m", "1000"], capsys)
    assert code == 0
    rs = rows(out)
    assert [r["pass"] for r in rs] == ["true", "skipped"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "doubleseries", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
