import json

import numpy as np
import pytest

from declqg.cli import DEMOS, load_scenario, main
from declqg.core import NumericalBreakdown


@pytest.fixture
def k2_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(DEMOS["symmetric-k2"]["config"]))
    return str(path)


def test_validate_reports_ok(k2_config, capsys):
    assert main(["validate", k2_config]) == 0
    out = capsys.readouterr().out
    assert "A1 OK, A2 OK" in out


def test_validate_writes_protocol_document(k2_config, tmp_path, capsys):
    out = tmp_path / "art"
    assert main(["--out", str(out), "validate", k2_config]) == 0
    doc = json.loads((out / "protocol.json").read_text())
    assert doc["kind"] == "symmetric_delay"


def test_solve_then_simulate_round_trip(k2_config, tmp_path, capsys):
    out = tmp_path / "art"
    assert main(["--out", str(out), "solve", k2_config]) == 0
    strategy = out / "strategy.json"
    assert strategy.exists()
    assert main(["--out", str(out), "simulate", k2_config,
                 "--strategy", str(strategy), "--rollouts", "2000",
                 "--samples", "1"]) == 0
    txt = capsys.readouterr().out
    summary = json.loads((out / "simulation.json").read_text())
    assert abs(summary["J"] - summary["exact_cost"]) < 1e-8
    assert abs(summary["mean"] - summary["exact_cost"]) < 4 * summary["stderr"]
    csv_path = out / "rollout_000.csv"
    header = csv_path.read_text().splitlines()[0]
    assert header.startswith("t,x_0,x_1,y_0,y_1,u_0,u_1,z_0")
    assert header.endswith("cost_step")


def test_simulate_deterministic(k2_config, tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["--out", str(out), "simulate", k2_config,
                     "--rollouts", "3000", "--seed", "42"]) == 0
    s1 = (out1 / "simulation.json").read_bytes()
    s2 = (out2 / "simulation.json").read_bytes()
    assert s1 == s2


def test_bad_R_rejected_with_field(tmp_path, capsys):
    doc = json.loads(json.dumps(DEMOS["symmetric-k2"]["config"]))
    doc["cost"]["R"] = [[1.0, 0.0], [0.0, 0.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", str(path)]) == 2
    assert "cost.R" in capsys.readouterr().err


def test_missing_field_rejected(tmp_path, capsys):
    doc = json.loads(json.dumps(DEMOS["symmetric-k2"]["config"]))
    del doc["noise"]["sigma_w0"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", str(path)]) == 2
    assert "noise.sigma_w0" in capsys.readouterr().err


def test_invalid_json_rejected_with_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"horizon": 3,,}')
    assert main(["validate", str(path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_numerical_breakdown_exit_code(k2_config, monkeypatch, capsys):
    import declqg.cli as cli_mod

    def boom(*a, **kw):
        raise NumericalBreakdown("filter covariance is not PSD", t=3)

    monkeypatch.setattr(cli_mod, "solve", boom)
    assert main(["solve", k2_config]) == 3
    assert "t=3" in capsys.readouterr().err


def test_tune_writes_log(k2_config, tmp_path, capsys):
    out = tmp_path / "art"
    assert main(["--out", str(out), "tune", k2_config,
                 "--budget", "40", "--restarts", "0"]) == 0
    lines = (out / "tune_log.csv").read_text().splitlines()
    assert lines[0] == "restart,eval,J_incumbent"
    assert len(lines) == 41
    incumbents = [float(row.split(",")[2]) for row in lines[1:]]
    assert all(b <= a + 1e-15 for a, b in zip(incumbents, incumbents[1:]))


@pytest.mark.parametrize("name", sorted(DEMOS))
def test_demos_load(name):
    sc = load_scenario(DEMOS[name]["config"])
    assert sc.plant.T >= 1


def test_demo_command_runs(capsys):
    assert main(["demo", "scalar-2ctrl-k1"]) == 0
    out = capsys.readouterr().out
    assert "J =" in out


def test_unknown_demo(capsys):
    assert main(["demo", "nope"]) == 2


def test_gains_in_config(tmp_path):
    doc = json.loads(json.dumps(DEMOS["scalar-2ctrl-k1"]["config"]))
    doc["gains"] = {"G": [[[0.2]], [[0.1]]], "H": [[[]], [[]]]}
    sc = load_scenario(doc)
    assert sc.gains.G[0][0][0, 0] == 0.2


def test_explicit_info_structure(tmp_path):
    doc = json.loads(json.dumps(DEMOS["scalar-2ctrl-k1"]["config"]))
    zero_m = {"mm": [[]], "my": [[]], "mu": [[]]}
    doc["info_structure"] = {
        "kind": "explicit",
        "params": {"strict": False, "blocks": [
            {"mm": np.zeros((0, 0)).tolist(), "my": np.zeros((0, 1)).tolist(),
             "mu": np.zeros((0, 1)).tolist(), "zm": np.zeros((1, 0)).tolist(),
             "zy": [[1.0]], "zu": [[0.0]]},
            {"mm": np.zeros((0, 0)).tolist(), "my": np.zeros((0, 1)).tolist(),
             "mu": np.zeros((0, 1)).tolist(), "zm": np.zeros((1, 0)).tolist(),
             "zy": [[1.0]], "zu": [[0.0]]},
        ]}}
    sc = load_scenario(doc)
    assert sc.protocol.d_z == 2
