import json
import subprocess
import sys

import pytest

from fifthmkdv.cli import run


def test_validate_defaults(capsys):
    assert run(["validate"]) == 0
    assert "config ok" in capsys.readouterr().out


def test_config_error_exit_code(capsys):
    assert run(["validate", "--experiment", "illposed", "--set", "illposed.s=0.9"]) == 2
    assert "-7/24 < s < 3/4" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("foo: 3\n")
    assert run(["validate", "--config", str(cfg)]) == 2
    assert "foo" in capsys.readouterr().err


def test_precondition_exit_code(tmp_path):
    # asking the estimator for a grid beyond its capacity
    code = run(["resonance", "--output-dir", str(tmp_path), "--set", "resonance.samples=10",
                "--set", "resonance.block_specs=1", "--set", "resonance.mc_samples=100000000"])
    assert code == 3


def test_acceptance_failure_exit_code(tmp_path):
    code = run(["suite", "--output-dir", str(tmp_path), "--set", "suite.oracles=[nls_order]", "--set", "suite.dt_factor=10"])
    assert code == 5
    rep = json.loads((tmp_path / "suite.json").read_text())
    assert rep["passed"] is False


def test_counterexample_run_writes_outputs(tmp_path):
    code = run(["counterexample", "--output-dir", str(tmp_path), "--set", "counterexample.N=[16, 32, 64]",
                "--set", "counterexample.s=[0.25]", "--seed", "4"])
    assert code == 0
    assert (tmp_path / "counterexample.json").exists()
    assert (tmp_path / "counterexample.csv").exists()
    assert (tmp_path / "counterexample_ratio_s=0.25.csv").exists()
    assert json.loads((tmp_path / "counterexample.json").read_text())["seed"] == 4


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FIFTHMKDV_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["suite", "--set", "suite.oracles=[nls_constant]", "--no-plot-data"]) == 0
    assert (tmp_path / "env" / "suite.json").exists()


def test_empty_suite_succeeds_with_warning(tmp_path, capsys):
    assert run(["suite", "--output-dir", str(tmp_path), "--set", "suite.oracles=[]"]) == 0
    assert "warning" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "fifthmkdv", "validate"], capture_output=True, text=True)
    assert out.returncode == 0


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        run(["plot"])


def test_numerical_guard_exit_code(tmp_path, monkeypatch):
    from fifthmkdv import experiments
    from fifthmkdv.errors import NumericalGuardError

    def boom(cfg):
        raise NumericalGuardError("L2 norm grew by more than 1e6")

    monkeypatch.setattr(experiments, "run_experiment", boom)
    assert run(["approx", "--output-dir", str(tmp_path)]) == 4
