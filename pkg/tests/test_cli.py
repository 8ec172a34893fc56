import json

import pytest

from saddleflow.cli import main

LP1 = {"name": "LP-1", "A": [[1, 1]], "b": [1], "c": [1, 2]}
RAY = {"name": "ray", "A": [[1, -1]], "b": [0], "c": [1, 0]}


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_solve_oracle(tmp_path, capsys):
    assert main(["solve", _write(tmp_path / "lp.json", LP1), "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["optimal_value"] == pytest.approx(1.0)
    assert out["x_star"] == [1.0, 0.0]


def test_solve_dynamics_writes_files(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["solve", _write(tmp_path / "lp.json", LP1), "--out", str(out_dir)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["terminal_kkt"] <= 1e-3
    assert (out_dir / "trajectory.csv").read_text().startswith("t,x_1,x_2,z_1,V,kkt")
    assert json.loads((out_dir / "metrics.json").read_text()) == metrics


def test_simulate_scenario(tmp_path, capsys):
    scen = {"lp": LP1, "disturbance": {"kind": "constant", "params": {"w_x": [0.1, 0.0], "w_z": [0.0]}},
            "integrator": {"t_max": 200}}
    assert main(["simulate", _write(tmp_path / "s.json", scen), "--out", str(tmp_path / "o")]) == 0
    assert json.loads(capsys.readouterr().out)["perturbed_kkt"] <= 1e-3


def test_rcg_scenario(tmp_path, capsys):
    scen = {"lp": LP1, "graph": {"n": 2, "edges": [[1, 2]]},
            "schedule": {"alternating": {"disconnected": 4, "connected": 1, "cycles": 10}},
            "integrator": {"t_max": 50, "stop_tol": 0.0, "record_every": 100},
            "output": {"dir": "rcg"}}
    assert main(["rcg", _write(tmp_path / "s.json", scen)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["checkpoint_residuals"]) == 10
    assert (tmp_path / "rcg" / "checkpoints.json").exists()


def test_rcg_needs_schedule(tmp_path, capsys):
    assert main(["rcg", _write(tmp_path / "s.json", {"lp": LP1})]) == 2
    assert "graph" in capsys.readouterr().err


def test_optctrl(tmp_path, capsys):
    spec = {"G": [[2.0]], "H_diag": [2.0], "x0": [1.0], "T": 0}
    out_dir = tmp_path / "oc"
    assert main(["optctrl", _write(tmp_path / "spec.json", spec), "--out", str(out_dir)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["optimal_value"] == pytest.approx(1.0)
    assert (out_dir / "controls.csv").read_text().splitlines() == ["tau,u_1", "0,-1"]
    assert (out_dir / "states.csv").read_text().splitlines() == ["tau,x_1", "1,0"]


def test_noiss(tmp_path, capsys):
    assert main(["noiss", _write(tmp_path / "lp.json", RAY)]) == 0
    cert = json.loads(capsys.readouterr().out)
    assert cert["w_bar"]["w_x"] == [0.0, 1.0]
    assert cert["w_bar"]["w_z"] == [0.0]


@pytest.mark.parametrize("argv_payload, code", [
    (("noiss", LP1), 2),
    (("solve", {"A": [[0, 0]], "b": [1], "c": [0, 0]}), 2),
    (("solve", {"A": [[1, 1]], "b": [-1], "c": [1, 1]}), 4),
    (("solve", {"A": [[1, -1]], "b": [0], "c": [-1, 0]}), 4),
])
def test_exit_codes(tmp_path, capsys, argv_payload, code):
    cmd, payload = argv_payload
    assert main([cmd, _write(tmp_path / "lp.json", payload)]) == code
    assert capsys.readouterr().err.startswith("error:")


def test_numerical_failure_exit_code(tmp_path, capsys):
    lp = {"A": [[30, 30]], "b": [1], "c": [1, 1]}
    scen = {"lp": lp, "initial": {"x": [1e307, 0], "z": [0]}, "integrator": {"dt": 0.1, "t_max": 1}}
    with pytest.warns(RuntimeWarning):
        assert main(["simulate", _write(tmp_path / "s.json", scen)]) == 3


def test_missing_file(capsys):
    assert main(["solve", "/nonexistent/lp.json"]) == 2
