import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from tree_sobolev import cli
from tree_sobolev.config import RunConfig
from tree_sobolev.hardy import theoretical_constants
from tree_sobolev.trace import ConvergenceError, TraceResult
from tree_sobolev.verify import Check, run_checks
from tree_sobolev.tree_core import TreeWeights
from tree_sobolev.walk import WalkProfile


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_extend(capsys):
    code, out, _ = run(["extend", "--n", "3", "--p", "3", "--weights", "dyadic",
                        "--leaf-values", "delta:0"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config_digest"] == RunConfig.from_dict(doc["config"]).digest
    assert doc["vertex_field"][-8:] == [1.0] + [0.0] * 7
    assert 1.0 - 1e-6 <= doc["extension_ratio"] <= theoretical_constants(3.0).C_bar
    assert out == json.dumps(doc, sort_keys=True, indent=2) + "\n"


def test_extend_needs_data(capsys):
    code, _, err = run(["extend", "--n", "3", "--p", "3", "--weights", "unit"], capsys)
    assert code == 2 and "leaf-values" in err


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--n", "4", "--p", "3", "--weights", "geometric:2", "--trials",
            "100000", "--seed", "7"]
    code, first, _ = run(argv, capsys)
    assert code == 0
    _, second, _ = run(argv, capsys)
    assert first == second
    doc = json.loads(first)
    assert doc["seed"] == 7 and len(doc["runs"]) == 3
    for entry in doc["runs"]:
        s = entry["start"][0]
        assert abs(entry["q_hat"] - entry["expected"]["q"]) <= 4 * entry["q_hat_se"] + 1e-12
        assert len(entry["p_hat"]) == 5 and s in (1, 2, 3)


def test_simulate_requires_seed(capsys):
    code, _, err = run(["simulate", "--n", "3", "--p", "2", "--weights", "unit"], capsys)
    assert code == 2 and "seed" in err


def test_kernels_csv(capsys):
    code, out, _ = run(["kernels", "--n", "3", "--p", "1.5", "--weights", "unit"], capsys)
    assert code == 0
    header, body = out.split("\n", 1)
    meta = json.loads(header[2:])
    assert meta["dense_edge_kernels"] and meta["N"] == 3
    rows = list(csv.DictReader(io.StringIO(body)))
    names = {r["matrix"] for r in rows}
    assert names == {"K", "K0", "K1", "L0", "L1", "script_K"}
    L0 = [float(r["value"]) for r in rows if r["matrix"] == "L0"]
    L1 = [float(r["value"]) for r in rows if r["matrix"] == "L1"]
    assert np.allclose(np.add(L0, L1), 0.0, atol=1e-14)
    assert sum(r["matrix"] == "K" for r in rows) == 14 * 14


def test_kernels_json_and_guard(capsys):
    code, out, _ = run(["kernels", "--n", "11", "--p", "2", "--weights", "unit", "--format",
                        "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert not doc["dense_edge_kernels"] and "K" not in doc["matrices"]


def test_opnorm(capsys):
    code, out, _ = run(["opnorm", "--n", "4", "--p", "3", "--weights", "unit", "--samples",
                        "20", "--seed", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["within_theorem"] and len(doc["ratio_samples"]) == 20
    assert doc["opnorm_T_lower"] <= doc["bound_2S0"] * (1 + 1e-9)


def test_report_example(capsys):
    code, out, _ = run(["report", "--n", "8", "--p", "1.25,1.5,2,3,4", "--weights", "dyadic",
                        "--weights", "unit", "--weights", "geometric:3", "--seed", "0",
                        "--samples", "50"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 15
    for row in rows:
        assert float(row["max_ratio"]) <= float(row["C_bar"])
        assert row["within_bound"] == "True"
    assert len({row["config_digest"] for row in rows}) == 1


def test_verify_ok(capsys):
    code, out, _ = run(["verify", "--n", "4", "--p", "2", "--weights", "dyadic"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and doc["seed"] == 0


def test_verify_violation(monkeypatch, capsys):
    def broken(weights, p, seed=0, samples=20):
        return run_checks(weights, p, seed, samples) + [Check("planted", 1.0, 0.0, False)]

    monkeypatch.setattr(cli, "run_checks", broken)
    code, out, _ = run(["verify", "--n", "3", "--p", "2"], capsys)
    assert code == 1
    assert not json.loads(out)["passed"]


def test_nonconvergence_exit(monkeypatch, capsys):
    def failing(weights, f, p):
        res = TraceResult(1.0, np.zeros(2 ** (weights.N + 1) - 1), 200, False, 1e-3)
        raise ConvergenceError("trace solver stopped", res)

    monkeypatch.setattr(cli, "trace_seminorm", failing)
    code, out, _ = run(["extend", "--n", "3", "--p", "3", "--weights", "unit",
                        "--leaf-values", "random:1"], capsys)
    assert code == 3
    diag = json.loads(out)
    assert diag["error"] == "non-convergence" and diag["details"]["iterations"] == 200
    assert "config_digest" in diag


@pytest.mark.parametrize("argv", [
    ["extend", "--n", "3", "--p", "0.5", "--weights", "unit", "--leaf-values", "delta:0"],
    ["extend", "--n", "3", "--p", "2", "--weights", "wobbly", "--leaf-values", "delta:0"],
    ["extend", "--n", "3", "--p", "2,3", "--weights", "unit", "--leaf-values", "delta:0"],
    ["kernels", "--n", "3", "--p", "2"],
    ["report", "--p", "2", "--weights", "unit", "--seed", "1"],
    ["extend", "--n", "3", "--p", "2", "--weights", "unit", "--leaf-values", "delta:0",
     "--format", "csv"],
    ["verify", "--config", "/nonexistent.json"],
])
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and err.startswith("error:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["extend", "--n", "three"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["nonsense"])
    assert info.value.code == 2


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = RunConfig("simulate", N=3, p=(2.0,), weights=(), seed=3, trials=500)
    path = tmp_path / "run.json"
    path.write_text(cfg.to_json())
    code, out, _ = run(["simulate", "--config", str(path), "--weights", "unit"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["trials"] == 500 and doc["config"]["weights"] == {"kind": "unit"}
    code, out2, _ = run(["simulate", "--config", str(path), "--weights", "unit", "--seed",
                         "4"], capsys)
    assert json.loads(out2)["config_digest"] != doc["config_digest"]


def test_output_file(tmp_path, capsys):
    target = tmp_path / "k.csv"
    code, out, _ = run(["kernels", "--n", "2", "--p", "2", "--weights", "unit", "--output",
                        str(target)], capsys)
    assert code == 0 and out == ""
    assert target.read_text().startswith("# {")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tree_sobolev", "verify", "--n", "3",
                           "--p", "3", "--weights", "explicit:1,0.5,4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"]


def test_simulate_matches_profile(capsys):
    code, out, _ = run(["simulate", "--n", "3", "--p", "3", "--weights", "explicit:1,0.5,4",
                        "--trials", "2000", "--seed", "1", "--start-depth", "2"], capsys)
    doc = json.loads(out)
    prof = WalkProfile.from_weights(TreeWeights((1.0, 0.5, 4.0)), 3.0)
    assert code == 0 and len(doc["runs"]) == 1
    assert np.allclose(doc["runs"][0]["expected"]["p"], prof.P[2])
