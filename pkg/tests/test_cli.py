"""
Tests for the qsv command line.

Runs every subcommand in-process through main() on small qubit and two-qubit
inputs and checks exit codes, printed verdicts and written files.
"""

import json

import numpy as np
import pytest

from qsv import __version__
from qsv.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from qsv.exceptions import EstimateInconsistencyError, InfeasibleConstraintsError
from qsv.hermitian import DensityMatrix


@pytest.fixture
def plan_file(tmp_path, state_file, ket00):
    """IAS plan for |00⟩ over the two-qubit Pauli set."""
    target = state_file("target.json", ket00)
    out = tmp_path / "plan.json"
    assert main(["plan", "--algo", "ias", "--target", str(target), "--out", str(out)]) == EXIT_OK
    return out


class TestPlanCommand:
    """Test `qsv plan`."""

    def test_writes_plan(self, plan_file, capsys):
        data = json.loads(plan_file.read_text(encoding="utf-8"))
        assert data["method"] == "IAS"
        assert len(data["indices"]) == 16
        assert data["indices"][0] == 28
        assert data["observables"] == "pauli2q"
        assert data["target"]["dim"] == 4

    def test_prints_labels(self, tmp_path, state_file, ket0, capsys):
        target = state_file("ket0.json", ket0)
        out = tmp_path / "plan.json"
        code = main(
            ["plan", "--algo", "ios", "--target", str(target), "--observables", "pauli1q",
             "--no-complete", "--out", str(out)]
        )
        assert code == EXIT_OK
        printed = capsys.readouterr().out
        assert printed.startswith("IOS plan (4 observables, stop: span)")
        assert "z+" in printed

    def test_missing_target(self, tmp_path):
        code = main(
            ["plan", "--algo", "ias", "--target", str(tmp_path / "absent.json"),
             "--out", str(tmp_path / "plan.json")]
        )
        assert code == EXIT_CONFIG

    def test_unknown_algorithm(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["plan", "--algo", "greedy", "--target", "x", "--out", str(tmp_path / "p")])


class TestVerifyCommand:
    """Test `qsv verify`."""

    def test_target_accepted(self, plan_file, state_file, ket00, tmp_path, capsys):
        state = state_file("prepared.json", ket00)
        out = tmp_path / "outcome.json"
        csv = tmp_path / "outcome.csv"
        code = main(
            ["verify", "--plan", str(plan_file), "--state", str(state),
             "--out", str(out), "--csv", str(csv)]
        )
        assert code == EXIT_OK
        assert capsys.readouterr().out.startswith("Accurate after 1 measurements")
        assert json.loads(out.read_text(encoding="utf-8"))["verdict"] == "Accurate"
        assert csv.read_text(encoding="utf-8").startswith("k,index,label,y,gamma,Gamma")

    def test_orthogonal_rejected(self, plan_file, state_file, ket11, capsys):
        state = state_file("prepared.json", ket11)
        assert main(["verify", "--plan", str(plan_file), "--state", str(state)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("NotAccurate after 1 measurements")

    def test_foreign_target(self, plan_file, state_file, ket00, ket11):
        """A --target that differs from the planned one is refused."""
        state = state_file("prepared.json", ket00)
        other = state_file("other.json", ket11)
        code = main(
            ["verify", "--plan", str(plan_file), "--state", str(state), "--target", str(other)]
        )
        assert code == EXIT_CONFIG

    def test_missing_plan(self, tmp_path, state_file, ket00):
        state = state_file("prepared.json", ket00)
        code = main(["verify", "--plan", str(tmp_path / "none.json"), "--state", str(state)])
        assert code == EXIT_CONFIG


class TestAdaptCommand:
    """Test `qsv adapt`."""

    def test_adapt(self, state_file, ket00, tmp_path, capsys):
        target = state_file("target.json", ket00)
        out = tmp_path / "trace.json"
        code = main(
            ["adapt", "--target", str(target), "--state", str(target), "--out", str(out)]
        )
        assert code == EXIT_OK
        printed = capsys.readouterr().out
        assert printed.startswith("Accurate after 1 measurements")
        assert "z+⊗z+" in printed
        assert json.loads(out.read_text(encoding="utf-8"))["steps"][0]["index"] == 28

    def test_dimension_mismatch(self, state_file, ket0, ket00):
        target = state_file("target.json", ket00)
        state = state_file("state.json", ket0)
        assert main(["adapt", "--target", str(target), "--state", str(state)]) == EXIT_CONFIG

    @pytest.mark.parametrize(
        "error",
        [
            EstimateInconsistencyError("look-ahead set is empty"),
            InfeasibleConstraintsError("the compatible set is empty"),
        ],
    )
    def test_step_errors_exit_failure(self, state_file, ket00, monkeypatch, caplog, error):
        """Errors raised inside a verification step map to the failure exit code."""

        def failing_run(*args, **kwargs):
            raise error.at_step(3)

        monkeypatch.setattr("qsv.cli.run_av", failing_run)
        target = state_file("target.json", ket00)
        assert main(["adapt", "--target", str(target), "--state", str(target)]) == EXIT_FAILURE
        assert "step 3:" in caplog.text


class TestBoundCommand:
    """Test `qsv bound`."""

    def test_bound_table(self, tmp_path, state_file, capsys):
        target = state_file("target.json", DensityMatrix.pure(np.array([1, 1]) / np.sqrt(2)))
        plan = tmp_path / "plan.json"
        main(
            ["plan", "--algo", "ias", "--target", str(target), "--observables", "pauli1q",
             "--out", str(plan)]
        )
        capsys.readouterr()

        assert main(["bound", "--plan", str(plan), "--prefix", "2"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split() == ["k", "label", "norm_sq", "hs_bound", "bures_bound"]
        assert len(lines) == 3
        assert lines[1].split()[1] in ("x+", "x−")
        assert float(lines[1].split()[2]) == pytest.approx(1.0)


class TestExperimentCommand:
    """Test `qsv experiment`."""

    def test_tiny_study(self, tmp_path, capsys):
        config = tmp_path / "study.toml"
        config.write_text(
            'seed = 11\nn_targets = 1\nalgorithms = ["IAS"]\nreconstruction_study = false\n',
            encoding="utf-8",
        )
        out_dir = tmp_path / "out"
        code = main(
            ["experiment", "--config", str(config), "--out-dir", str(out_dir), "--n-workers", "1"]
        )
        assert code == EXIT_OK
        assert (out_dir / "raw.csv").exists()
        summary = json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))
        assert summary["config"]["n_workers"] == 1
        assert summary["n_trials"] == 2
        assert "IAS" in capsys.readouterr().out

    def test_bad_config(self, tmp_path):
        config = tmp_path / "study.toml"
        config.write_text("unknown_key = 1\n", encoding="utf-8")
        code = main(["experiment", "--config", str(config), "--out-dir", str(tmp_path / "out")])
        assert code == EXIT_CONFIG

    def test_bad_override(self, tmp_path):
        code = main(
            ["experiment", "--out-dir", str(tmp_path / "out"), "--algorithms", "IAS,Nope"]
        )
        assert code == EXIT_CONFIG


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
