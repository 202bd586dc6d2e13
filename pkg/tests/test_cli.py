import csv
import io
import json
import math
import os
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from gykit.cli import main
from gykit.pricing import BENCHMARKS, dump_spec

SRC = str(Path(__file__).resolve().parents[1] / "src")


def schema(name):
    return json.loads(resources.files("gykit").joinpath("schemas", name).read_text())


def run(args, tmp_path, name="out"):
    out = tmp_path / f"{name}.txt"
    code = main([*args, "--out", str(out)])
    return code, out.read_text(), json.loads((tmp_path / f"{name}.txt.manifest.json").read_text())


def cli(*args):
    env = dict(os.environ, PYTHONPATH=SRC + os.pathsep + os.environ.get("PYTHONPATH", ""))
    return subprocess.run([sys.executable, "-m", "gykit", *args], capture_output=True, text=True, env=env)


def rows(text):
    return list(csv.DictReader(io.StringIO(text.split("\n\n")[0])))


def test_psi_zero_ray(tmp_path):
    code, text, man = run(["psi", "--point", "1,-1,1", "--pole", "1,0,0"], tmp_path)
    assert code == 0
    r = rows(text)[0]
    assert float(r["psi"]) == 0.0
    assert list(r) == ["x", "y", "t", "x0", "y0", "t0", "E", "psi", "branch"]
    jsonschema.validate(man, schema("manifest.json"))


def test_psi_unreachable_prints_inf(tmp_path):
    _, text, _ = run(["psi", "--point", "1,1,1", "--pole", "1,0,0"], tmp_path)
    assert rows(text)[0]["psi"] == "inf"


def test_psi_grid_preserves_rows(tmp_path):
    g = tmp_path / "g.csv"
    g.write_text("x,y,t\n1,-1,1\n2,-3,0.5\n0.5,-0.2,2\n1,1,1\n")
    _, text, _ = run(["psi", "--grid", str(g), "--pole", "1,0,0"], tmp_path)
    assert len(rows(text)) == 4


def test_psi_trajectory(tmp_path):
    from gykit.group import GPoint
    from gykit.value_function import trajectory
    _, text, _ = run(["psi", "--point", "4,-2,2", "--pole", "1,0,0", "--traj", "10"], tmp_path)
    head, traj = text.split("\n\n")
    tr = list(csv.DictReader(io.StringIO(traj)))
    ref = trajectory(GPoint(4, -2, 2), GPoint(1, 0, 0), 11)
    assert len(tr) == 11
    for r, s in zip(tr, ref):
        assert float(r["x"]) == s.x and float(r["y"]) == s.y


def test_csv_uses_17_digits(tmp_path):
    _, text, _ = run(["kernel", "--type", "gamma0", "--point", "1,-0.1,0.1", "--pole", "1,0,0"], tmp_path)
    r = rows(text)[0]
    assert r["y"] == "-0.10000000000000001"


def test_kernel_kolmo_value(tmp_path):
    _, text, _ = run(["kernel", "--type", "kolmo", "--point", "0,0,1", "--pole", "0,0,0"], tmp_path)
    v = float(rows(text)[0]["value"])
    assert v == pytest.approx(math.sqrt(3) / (2 * math.pi), rel=1e-15)
    assert round(v, 7) == 0.2756644


def test_kernel_gamma0_support_and_flags(tmp_path):
    _, text, _ = run(["kernel", "--type", "gamma0", "--point", "1,0.5,1", "--pole", "1,0,0"], tmp_path)
    assert float(rows(text)[0]["value"]) == 0.0
    _, text, _ = run(["kernel", "--type", "gamma0", "--point", "1,-0.1,0.1", "--pole", "1,0,0"], tmp_path)
    assert "unstable_small_t" in rows(text)[0]["flags"]
    _, text, _ = run(["kernel", "--type", "gamma_mu", "--mu", "1.0", "--point", "1,-1,1", "--pole", "1,0,0"], tmp_path)
    assert float(rows(text)[0]["value"]) > 0


def _grid(tmp_path):
    g = tmp_path / "grid.csv"
    lines = ["x,y,t"] + [f"{x},{y},{t}" for x in (0.5, 1, 2) for y in (-3, -1.5, -0.5) for t in (0.5, 1, 2)]
    g.write_text("\n".join(lines) + "\n")
    return g


def test_bounds_calibrate_then_check(tmp_path):
    g = _grid(tmp_path)
    code, text, _ = run(["bounds", "--grid", str(g), "--eps", "0.1", "--calibrate", "--records"], tmp_path, "cal")
    assert code == 0
    rep = json.loads(text)
    jsonschema.validate(rep, schema("bounds_report.json"))
    assert rep["report"]["violations_lower"] == 0 and rep["report"]["violations_upper"] == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(rep["config"]))
    code, text, _ = run(["bounds", "--grid", str(g), "--config", str(cfg)], tmp_path, "chk")
    chk = json.loads(text)
    jsonschema.validate(chk, schema("bounds_report.json"))
    assert chk["report"]["violations_lower"] == 0 and chk["report"]["violations_upper"] == 0


def test_bounds_empty_admissible_grid(tmp_path):
    g = tmp_path / "g.csv"
    g.write_text("x,y,t\n1,1,1\n1,0.5,2\n")
    p = cli("bounds", "--grid", str(g), "--calibrate", "--out", str(tmp_path / "o.json"))
    assert p.returncode == 2 and "admissible" in p.stderr


def test_usage_errors_exit_2(tmp_path):
    assert cli("psi", "--point", "1,2").returncode == 2
    assert cli("psi", "--bogus").returncode == 2
    assert cli("kernel", "--type", "gamma0", "--point", "-1,0,1", "--pole", "1,0,0").returncode == 2
    assert cli("harnack", "--t0", "0", "--t", "0.5", "--T0", "-1").returncode == 2


def test_numeric_failure_exits_1(tmp_path):
    p = cli("simulate", "--model", "gbm", "--mu", "0", "--sigma", "6", "--steps", "1",
            "--scheme", "euler", "--paths", "1000", "--out", str(tmp_path / "s.csv"))
    assert p.returncode == 1 and "numeric failure" in p.stderr


def test_harnack_example(tmp_path):
    _, text, _ = run(["harnack", "--omega", "zero", "--theta", "0.5", "--t0", "0", "--t", "-0.2",
                      "--T0", "-1"], tmp_path)
    d = json.loads(text)
    assert d["times"] == pytest.approx([0, -0.0625, -0.125, -0.1875, -0.2], abs=1e-15)
    assert all(d["links_verified"])


def test_price_spec_and_schema(tmp_path):
    spec = tmp_path / "spec.json"
    doc = dump_spec(*BENCHMARKS["floating_call"])
    jsonschema.validate(doc, schema("option_market.json"))
    spec.write_text(json.dumps(doc))
    _, text, man = run(["price", "--spec", str(spec)], tmp_path)
    rep = json.loads(text)
    jsonschema.validate(rep["report"], schema("price_report.json"))
    jsonschema.validate(rep["spec"], schema("option_market.json"))
    assert rep["report"]["method"] == "quadrature_gamma0"
    assert man["outputs"]


def test_price_benchmark_k0(tmp_path):
    p = cli("price", "--benchmark", "k0", "--manifest", str(tmp_path / "m.json"))
    assert p.returncode == 0
    assert json.loads(p.stdout)["passed"] is True
    assert "PASS" in p.stderr


def test_simulate_outputs(tmp_path):
    _, text, man = run(["simulate", "--paths", "200", "--steps", "10", "--seed", "4"], tmp_path)
    r = rows(text)
    assert list(r[0]) == ["path_id", "x", "y"] and len(r) == 200
    assert man["seeds"] == [4]
    _, text, _ = run(["simulate", "--paths", "20000", "--steps", "10", "--density", "--density-n", "5"],
                     tmp_path, "dens")
    assert list(rows(text)[0]) == ["x", "y", "value"] and len(rows(text)) == 25


def test_same_seed_same_digest(tmp_path):
    a = run(["simulate", "--paths", "500", "--steps", "5", "--seed", "8"], tmp_path, "a")[2]
    b = run(["simulate", "--paths", "500", "--steps", "5", "--seed", "8"], tmp_path, "b")[2]
    c = run(["simulate", "--paths", "500", "--steps", "5", "--seed", "9"], tmp_path, "c")[2]
    da, db, dc = (list(m["outputs"].values())[0] for m in (a, b, c))
    assert da == db != dc
