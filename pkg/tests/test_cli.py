import json
import math
import subprocess
import sys
import warnings

import numpy as np
import pytest

from grover_carving.channels import mismatch_fidelity_closed
from grover_carving.cli import (
    EXIT_CONFIG,
    EXIT_CONVERGENCE,
    EXIT_INFEASIBLE,
    EXIT_OK,
    ConfigError,
    RunConfig,
    csv_text,
    load_sidecar,
    main,
)
from grover_carving.experiments import NonUnimodalWarning


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonUnimodalWarning)
        yield


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == EXIT_OK else None)


def test_exit_code_values():
    assert (EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CONVERGENCE) == (0, 2, 3, 4)


def test_plan_w_state(capsys):
    code, out = run_json(capsys, ["plan", "--dicke", "3", "1"])
    assert code == EXIT_OK
    assert out["steps"] == 1
    assert len(out["roots"]) == 2
    assert out["predicted_fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_plan_half_filling_500(capsys):
    code, out = run_json(capsys, ["plan", "--dicke", "500", "250"])
    assert code == EXIT_OK
    assert out["steps"] == 4
    assert out["existence"]["min_steps"] == 4


def test_plan_ghz_two_part(capsys):
    code, out = run_json(capsys, ["plan", "--ghz", "12", "--variant", "hadamard"])
    assert code == EXIT_OK
    assert "prelude" in out
    theta = 2 * math.asin(math.sqrt(0.5 * math.comb(12, 6) / 2 ** 11))
    assert out["steps"] == max(1, math.floor(math.pi / (2 * theta) - 0.5 + 0.5))


def test_plan_cat(capsys):
    code, out = run_json(capsys, ["plan", "--cat", "10", "1.2"])
    assert code == EXIT_OK
    assert out["phi_cat"] == pytest.approx(1.2)


def test_plan_long_phase(capsys):
    code, out = run_json(capsys, ["plan", "--dicke", "6", "3", "--long-phase"])
    assert code == EXIT_OK
    assert out["variant"] == "long-phase"


def test_plan_infeasible_exit(capsys):
    assert main(["plan", "--dicke", "10", "5", "--steps", "1"]) == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert main(["plan", "--dicke", "10", "0"]) == EXIT_CONFIG
    assert main(["simulate", "--zeta", "1.5"]) == EXIT_CONFIG
    assert main(["nonsense"]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_degenerate_fit_exit(tmp_path):
    out = tmp_path / "fit.csv"
    assert main(["fit-scaling", "--m", "1", "--C-grid", "100", "1000", "-o", str(out)]) \
        == EXIT_CONVERGENCE
    assert not out.exists()


def test_empty_grid_writes_nothing(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--axis", "zeta", "--grid", "-o", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert not out.with_suffix(".json").exists()


def test_zeta_sweep_columns(tmp_path, capsys):
    out = tmp_path / "zeta.csv"
    assert main(["sweep", "--axis", "zeta", "--grid", "0.9", "0.95", "1.0", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "zeta,F_k1,F_k2,F_k3,F_k4"
    row = [float(x) for x in lines[1].split(",")]
    assert row[0] == 0.9
    for k in range(1, 5):
        assert row[k] == pytest.approx(mismatch_fidelity_closed(k, 0.9), abs=1e-11)


def test_sweep_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--axis", "phi", "-N", "20", "--m", "2", "--grid", "0.2", "0.8", "1.4"]
    assert main(argv + ["-o", str(a)]) == EXIT_OK
    assert main(argv + ["-o", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    assert a.read_text().splitlines()[0].startswith("phi,fidelity")


def test_sidecar_round_trip(tmp_path):
    out = tmp_path / "run.csv"
    assert main(["simulate", "-N", "10", "--m", "2", "--steps", "1", "--C", "200", "--d", "3",
                 "-o", str(out)]) == EXIT_OK
    doc = json.loads(out.with_suffix(".json").read_text())
    cfg = load_sidecar(out.with_suffix(".json"))
    assert cfg == RunConfig.from_dict(doc["config"])
    assert cfg.to_dict() == doc["config"]
    assert cfg.n_qubits == 10 and cfg.steps == 1 and cfg.C == 200.0
    # re-running the echoed config reproduces the CSV
    cfg_path = tmp_path / "cfg.json"
    echo = dict(doc["config"], output=str(tmp_path / "again.csv"))
    echo.pop("command")
    cfg_path.write_text(json.dumps(echo))
    assert main(["simulate", "--config", str(cfg_path)]) == EXIT_OK
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()


def test_flags_override_config(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"n_qubits": 8, "m": 2, "steps": 1, "d": 3.0}))
    code, out = run_json(capsys, ["simulate", "--config", str(cfg_path), "--m", "3"])
    assert code == EXIT_OK
    assert out["m"] == 3 and out["n_qubits"] == 8


def test_simulate_ideal_limit(capsys):
    code, out = run_json(capsys, ["simulate", "-N", "8", "--m", "2", "--C", "1e15", "--d", "1e5",
                                  "--w", "0", "--steps", "1"])
    assert code == EXIT_OK
    from grover_carving.grover import min_steps_exact
    assert min_steps_exact(8, 2) == 1
    assert out["fidelity"] == pytest.approx(1.0, abs=1e-4)


def test_simulate_zeta_lowers_fidelity(capsys):
    base = ["simulate", "-N", "8", "--m", "2", "--steps", "1", "--d", "3"]
    _, a = run_json(capsys, base)
    _, b = run_json(capsys, base + ["--zeta", "0.9"])
    assert b["fidelity"] < a["fidelity"]


def test_simulate_ghz(capsys):
    code, out = run_json(capsys, ["simulate", "--state", "ghz", "-N", "12", "--C", "1e10",
                                  "--w", "0"])
    assert code == EXIT_OK
    assert out["fidelity"] > 0.99


def test_simulate_ghz_parity_fallback_tracks_prediction(capsys):
    _, plan = run_json(capsys, ["plan", "--ghz", "6"])
    assert any("falling back" in w for w in plan["warnings"])
    with pytest.warns(UserWarning, match="falling back"):
        _, out = run_json(capsys, ["simulate", "--state", "ghz", "-N", "6", "--C", "1e10",
                                   "--w", "0"])
    assert out["fidelity"] == pytest.approx(plan["predicted_fidelity"], abs=1e-3)


def test_raw_rates_warn(capsys):
    with pytest.warns(UserWarning, match="raw cavity rates"):
        code = main(["simulate", "-N", "6", "--m", "1", "--steps", "1", "--g", "20",
                     "--delta", "100"])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["d"] == pytest.approx(400 / 100)


def test_raw_rates_need_g():
    with pytest.raises(ConfigError):
        RunConfig(kappa_r=1.0).cavity()


def test_fit_scaling_command(tmp_path, capsys):
    out = tmp_path / "fit.csv"
    code, res = run_json(capsys, ["fit-scaling", "--m", "2", "-N", "15", "--w", "0",
                                  "-o", str(out)])
    assert code == EXIT_OK
    assert res["slope"] == pytest.approx(-0.5, abs=0.1)
    assert json.loads(out.with_suffix(".json").read_text())["result"]["slope"] == res["slope"]


def test_baseline_command(capsys):
    code, res = run_json(capsys, ["baseline", "-N", "20", "--m", "2", "--C", "1000"])
    assert code == EXIT_OK
    assert res["carving_mean_repeats"] == pytest.approx(1 / res["carving_success_probability"])
    assert 0 < res["grover_fidelity"] <= 1


def test_csv_formatting():
    text = csv_text({"a": np.array([1, 2]), "b": np.array([1 / 3, math.inf])})
    assert text == "a,b\n1,0.333333333333\n2,inf\n"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "grover_carving", "plan", "--dicke", "4", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["steps"] == 1
