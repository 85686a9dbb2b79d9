from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from hypharm.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_eigen_n5_grid(capsys):
    code, out, _ = run(["eigen", "--n", "5", "--form", "n5", "--dmin", "-3", "--dmax", "3", "--step", "0.01"], capsys)
    assert code == 0
    rows = table(out)
    assert len(rows) == 601
    vals = [float(r["value"]) for r in rows]
    flips = sum(a * b < 0 for a, b in zip(vals, vals[1:]))
    assert flips == 2
    assert out.startswith("# hypharm ")
    assert "# columns: d,value" in out


def test_eigen_zeros_and_ray(capsys):
    code, out, _ = run(["eigen", "--n", "5", "--form", "n5", "--report", "zeros"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["agree"]
    assert doc["d1"] == pytest.approx(1.1996786402577868, abs=1e-12)
    code, out, _ = run(["eigen", "--n", "2", "--form", "uz", "--a1", "0", "--a2", "1", "--ray", "0"], capsys)
    rows = table(out)
    assert code == 0 and float(rows[0]["value"]) == 0.0
    assert float(rows[-1]["x1"]) < 1


def test_eigen_usage_errors(capsys):
    assert run(["eigen", "--n", "3", "--form", "n5"], capsys)[0] == 2
    assert run(["eigen", "--form", "uz", "--report", "zeros"], capsys)[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["eigen", "--form", "nope"])
    assert e.value.code == 2


def test_frobenius(capsys):
    code, out, _ = run(["frobenius", "--n", "5", "--lambda", "4", "--terms", "40"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["r1"] == doc["r2"] == 2.0
    assert doc["a2_over_a0"] == -1.5
    assert len(doc["coefficients"]) == 41
    code, out, _ = run(["frobenius", "--n", "3", "--lambda", "0"], capsys)
    doc = json.loads(out)
    assert (doc["r1"], doc["r2"]) == (2.0, 0.0)
    code, _, err = run(["frobenius", "--n", "3", "--lambda", "2"], capsys)
    assert code == 3 and "lambda" in err
    assert run(["frobenius", "--n", "3", "--lambda-frac", "1.5"], capsys)[0] == 3


def test_cantor(capsys):
    code, out, _ = run(["cantor", "--l", "2", "--m", "3", "--level", "10", "--check-density", "50"], capsys)
    assert code == 0
    rows = table(out)
    assert len(rows) == 50 and all(r["lower_ok"] == r["upper_ok"] == "true" for r in rows)
    code, out, _ = run(["cantor", "--level", "4", "--n", "3"], capsys)
    rows = table(out)
    assert code == 0 and len(rows) == 16 and "x3" in rows[0]


def test_superpose_decay_check_reports_slope(capsys):
    argv = ["superpose", "--n", "2", "--l", "2", "--m", "3", "--auto-level", "--ray-node", "0", "--dmax", "9", "--check-decay"]
    code, out, err = run(argv, capsys)
    rows = table(out)
    assert len(rows) == 30
    assert "decay_slope[4,9]=" in out
    assert list(rows[0]) == ["delta", "d", "u", "abs_integral", "envelope_lo", "envelope_hi", "level", "warning"]
    # exit status mirrors the slope test on d in [4, 9]
    slope = float(out.split("decay_slope[4,9]=")[1].split()[0])
    assert code == (0 if abs(slope + 0.13093) <= 0.05 else 4)


def test_superpose_antipode_and_check(capsys):
    code, out, _ = run(["superpose", "--ray-antipode", "--dmin", "1", "--dmax", "5", "--rows", "8", "--check"], capsys)
    rows = table(out)
    assert code == 0
    assert all(float(r["u"]) < 0 for r in rows)
    assert all(r["envelope_lo"] == "nan" for r in rows)
    assert run(["superpose", "--ray-antipode", "--ray-node", "1"], capsys)[0] == 2
    assert run(["superpose", "--ray-antipode", "--check-decay", "--rows", "6"], capsys)[0] == 4


def test_superpose_level_violation_fails_check(capsys):
    code, out, _ = run(["superpose", "--ray-node", "0", "--level", "4", "--dmax", "8", "--rows", "6", "--check"], capsys)
    assert code == 4
    assert "coarse" in out


def test_superpose_scan(capsys):
    code, out, _ = run(["superpose", "--scan", "--angles", "12", "--scan-radii", "0", "0.99"], capsys)
    rows = table(out)
    assert code == 0 and len(rows) == 24
    assert all(r["label"] == "0" for r in rows[:12])


@pytest.mark.parametrize(
    "extra",
    [
        ["--target", "uz", "--n", "3", "--a1", "1", "--a2", "1"],
        ["--target", "n5", "--n", "5"],
        ["--target", "hyperball", "--n", "3", "--points", "30"],
        ["--target", "superpose", "--level", "8", "--points", "20", "--radius", "0.8"],
    ],
)
def test_verify_targets(capsys, extra):
    code, out, _ = run(["verify", "--check", *extra], capsys)
    doc = json.loads(out)["residual"]
    assert code == 0
    assert doc["max"] < 1e-5 and doc["order_ok"]


def test_verify_calibrate(capsys):
    code, out, _ = run(["verify", "--calibrate", "--n", "3"], capsys)
    cal = json.loads(out)["calibration"]
    assert code == 0 and cal["theta1"] < cal["theta0"]


def test_barrier(capsys):
    code, out, _ = run(["barrier", "--n", "3", "--lambda-frac", "1.0", "--points", "10", "--eps", "1e-3", "--check"], capsys)
    rep = json.loads(out)["barrier"]
    assert code == 0
    assert rep["total"] <= rep["bound"] * 1.05 and rep["bound"] < 1e-3
    assert len(rep["coverings"]) == 10
    assert run(["barrier", "--eps", "50"], capsys)[0] == 3


def test_determinism_and_config(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"ray_node": 3, "dmax": 6, "rows": 12, "deterministic": True}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["superpose", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["superpose", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert '"ray_node": 3' in text and '"deterministic": true' in text
    # explicit flags beat the config file
    c = tmp_path / "c.csv"
    assert main(["superpose", "--config", str(cfg), "--rows", "7", "--out", str(c)]) == 0
    assert len(table(c.read_text())) == 7
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit) as e:
        main(["superpose", "--config", str(bad)])
    assert e.value.code == 2
    capsys.readouterr()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hypharm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("hypharm ")
