import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from uav2x.cli import ExperimentSpec, main, run_experiment, sweep_csv
from uav2x.config import bundled_config, config_from_dict

FIXTURES = Path(__file__).parent / "fixtures"


def small_config(tmp_path, **scenario) -> Path:
    d = bundled_config("desk").to_dict()
    d["scenario"].update({"horizon_T": 6, "trajectory_length": 50.0, **scenario})
    p = tmp_path / "small.json"
    p.write_text(json.dumps(d), encoding="utf-8")
    return p


def test_simulate_twice_is_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for f in ("slots.csv", "summary.json", "iterations.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = list(csv.reader(io.StringIO((tmp_path / "a" / "slots.csv").read_text())))
    assert rows[0] == ["slot", "policy", "objective", "iterations", "total_uplink_bits", "u2u_bits", "violations"]
    assert len(rows) == 7


def test_simulate_to_stdout_and_debug_trace(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--policy", "greedy"]) == 0
    assert capsys.readouterr().out.startswith("slot,policy,")
    out = tmp_path / "dbg"
    assert main(["simulate", "--config", str(cfg), "--debug-trace", "--out", str(out)]) == 0
    events = [json.loads(line) for line in (out / "bnb_trace.jsonl").read_text().splitlines()]
    assert sum(e["event"] == "slot" for e in events) == 6


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["simulate", "--config", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_unknown_flag_and_bad_values(tmp_path, capsys):
    assert main(["simulate", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["sweep", "--var", "v_max", "--values", "a,b"]) == 1
    cfg = small_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--var", "u2u_ratio", "--values", "1.5"]) == 1


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": {"n_uavs": -3}}))
    assert main(["simulate", "--config", str(bad)]) == 1
    bad.write_text(json.dumps({"nonsense": {}}))
    assert main(["simulate", "--config", str(bad)]) == 1


def test_horizon_infeasible_exit_code(tmp_path, capsys):
    cfg = small_config(tmp_path, horizon_T=2)
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    cfg = small_config(tmp_path)
    r = subprocess.run([sys.executable, "-m", "uav2x.cli", "simulate", "--config", str(cfg), "--seed", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.count("\n") == 7


def solve(kind, fixture, tmp_path, *extra):
    code = main([kind, str(FIXTURES / fixture), "--out", str(tmp_path), *extra])
    return code, json.loads((tmp_path / "solution.json").read_text())


def test_solve_u2i_matches_stored_oracle(tmp_path):
    code, out = solve("solve-u2i", "u2i_4x4.json", tmp_path)
    assert code == 0 and out["oracle_match"] is True
    assert out["objective"] == pytest.approx(out["oracle_objective"], rel=1e-9)


def test_solve_u2u_matches_stored_oracle(tmp_path):
    code, out = solve("solve-u2u", "u2u_3x4.json", tmp_path, "--bnb-budget", "0", "--debug-trace")
    assert code == 0 and out["feasible"] and out["complete"] and out["oracle_match"] is True
    assert out["objective"] == pytest.approx(out["oracle_objective"], rel=1e-9)
    assert (tmp_path / "bnb_trace.jsonl").read_text()


def test_solve_u2u_infeasible_exit_code(tmp_path):
    code, out = solve("solve-u2u", "u2u_infeasible.json", tmp_path)
    assert code == 2 and out["feasible"] is False and out["oracle_match"] is True


def test_bad_fixture(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("[1, 2]")
    assert main(["solve-u2i", str(p)]) == 1
    assert main(["solve-u2u", str(tmp_path / "missing.json")]) == 1


def small_base():
    d = bundled_config("desk").to_dict()
    d["scenario"].update({"horizon_T": 5, "trajectory_length": 40.0})
    return config_from_dict(d)


def test_single_point_single_replica(tmp_path):
    rows = run_experiment(ExperimentSpec("v_max", (10.0,), 1, small_base(), ("greedy",)), workers=0)
    assert len(rows) == 1 and rows[0]["replicas"] == 1 and rows[0]["failures"] == 0


def test_sweep_aggregation_identity():
    base = small_base()
    two = run_experiment(ExperimentSpec("n_u2i", (4.0,), 2, base, ("greedy",), first_seed=3), workers=0)[0]
    ones = [run_experiment(ExperimentSpec("n_u2i", (4.0,), 1, base, ("greedy",), first_seed=s), workers=0)[0] for s in (3, 4)]
    for key in ("mean_sum_rate", "mean_u2u_sum_rate", "mean_uploaded_bits"):
        assert two[key] == pytest.approx((ones[0][key] + ones[1][key]) / 2, rel=1e-12)


def test_sweep_failures_counted():
    base = small_base()
    rows = run_experiment(ExperimentSpec("horizon_T", (3.0, 5.0), 2, base, ("greedy",)), workers=0)
    assert [r["failures"] for r in rows] == [2, 0]


def test_sweep_threads_identical(tmp_path, monkeypatch):
    cfg = small_config(tmp_path)
    args = ["sweep", "--config", str(cfg), "--var", "v_max", "--values", "10,20", "--replicas", "3"]
    outputs = []
    for threads in ("0", "8"):
        monkeypatch.setenv("UAV2X_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert main([*args, "--out", str(out)]) == 0
        outputs.append((out / "sweep.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert sweep_csv([]).startswith("variable,value,policy")
