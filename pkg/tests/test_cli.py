"""Command-line contract: exit codes, JSON envelopes, CSV headers.

Runs main() in process.  Exit code 0 means every check passed, 1 is a
failed check or pipeline error (reported as JSON), 2 is bad usage.
"""
from __future__ import annotations

import json

import numpy as np
import pytest

from peflow import cli, extremal2d, gpe, oracle, signals


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run_cli(capsys, *argv)
    return code, json.loads(out)


class TestEnvelope:
    def test_config_echo(self, capsys):
        code, doc = run_json(capsys, "mu", "--a", "1", "--b", "3")
        assert code == 0
        cfg = doc["config"]
        assert cfg["subcommand"] == "mu"
        assert cfg["a"] == 1.0 and cfg["b"] == 3.0
        assert cfg["format"] == "json"

    def test_byte_identical_reruns(self, capsys):
        _, out1 = run_cli(capsys, "mu", "--a", "0.5", "--b", "2")
        _, out2 = run_cli(capsys, "mu", "--a", "0.5", "--b", "2")
        assert out1 == out2

    def test_out_file_atomic(self, capsys, tmp_path):
        target = tmp_path / "mu.json"
        code, out = run_cli(capsys, "mu", "--a", "1", "--b", "3",
                            "--out", str(target))
        assert code == 0
        assert out == ""
        doc = json.loads(target.read_text())
        assert doc["mu"] == pytest.approx(0.4819817203199967, rel=1e-9)
        assert not (tmp_path / "mu.json.tmp").exists()


class TestExitCodes:
    def test_usage_errors_exit_2(self, capsys):
        assert cli.main(["mu", "--b", "3"]) == 2
        assert cli.main(["mu", "--a", "3", "--b", "1"]) == 2
        assert cli.main(["extremal", "--a", "1", "--b", "1"]) == 2
        assert cli.main(["mu", "--a", "1", "--b", "3", "--n", "0"]) == 2
        capsys.readouterr()

    def test_pipeline_error_exit_1_with_report(self, capsys):
        code, doc = run_json(capsys, "decay", "--signal", "/no/such/file.json",
                             "--a", "1", "--b", "2")
        assert code == 1
        assert doc["passed"] is False
        assert "error" in doc and doc["error"]["type"]

    def test_bad_flag_value_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["mu", "--a", "one", "--b", "3"])
        assert exc.value.code == 2


class TestMu:
    def test_fields(self, capsys):
        code, doc = run_json(capsys, "mu", "--a", "1", "--b", "3")
        assert code == 0
        assert doc["passed"] is True
        assert doc["mu"] <= 1.0 + 1e-6
        assert doc["ratio"] == pytest.approx(doc["mu"] * 10.0)
        assert doc["upper_bound_a"] == 1.0

    def test_equal_bounds(self, capsys):
        code, doc = run_json(capsys, "mu", "--a", "2", "--b", "2")
        assert code == 0
        assert doc["mu"] == pytest.approx(2.0)


class TestExtremal:
    def test_json_report(self, capsys):
        code, doc = run_json(capsys, "extremal", "--a", "1", "--b", "3")
        assert code == 0
        assert doc["passed"] is True
        assert set(doc["params"]) == {"a", "b", "T", "alpha", "d", "nu",
                                      "phi0", "kappa"}
        assert all(v < 1e-6 for k, v in doc["residuals"].items()
                   if k in extremal2d.ExtremalReport.PRIMARY)

    def test_csv_trajectory(self, capsys):
        code, out = run_cli(capsys, "extremal", "--a", "1", "--b", "3",
                            "--format", "csv")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "t,theta,eta,phi,cost"
        assert len(lines) == 2002
        last = [float(v) for v in lines[-1].split(",")]
        assert last[0] == pytest.approx(4.0)
        assert last[4] == pytest.approx(0.4819817203199967, rel=1e-6)


class TestDecayGain:
    def test_decay_synthesized(self, capsys):
        code, doc = run_json(capsys, "decay", "--a", "1", "--b", "3")
        assert code == 0
        assert doc["decay"]["method"] == "monodromy"
        assert doc["decay"]["rate"] == pytest.approx(doc["expected_rate"], rel=1e-6)

    def test_decay_signal_file(self, capsys, tmp_path):
        path = tmp_path / "axis.json"
        signals.save_signal(signals.axis_hopping_control(1.0, 1.0, 2), str(path))
        code, doc = run_json(capsys, "decay", "--signal", str(path),
                             "--a", "1", "--b", "1")
        assert code == 0
        assert doc["decay"]["rate"] == pytest.approx(1.0, rel=1e-7)

    def test_gain_report(self, capsys):
        code, doc = run_json(capsys, "gain", "--a", "1", "--b", "3", "--T", "1",
                             "--periods", "50")
        assert code == 0
        g = doc["gain"]
        assert g["lower"] <= g["simulated"] * 1.02
        assert g["simulated"] <= g["upper"]

    def test_gain_short_horizon_not_certified(self, capsys):
        # at k = 10 the ratio is still >2% below its limit: honest failure
        code, doc = run_json(capsys, "gain", "--a", "1", "--b", "3", "--T", "1",
                             "--periods", "10")
        assert code == 1
        assert doc["passed"] is False

    def test_gain_csv(self, capsys):
        code, out = run_cli(capsys, "gain", "--a", "1", "--b", "3", "--T", "1",
                            "--periods", "3", "--format", "csv")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "t,x_norm,u_norm"
        assert len(lines) > 10


class TestGpe:
    def test_constant_divergent_csv(self, capsys):
        code, out = run_cli(capsys, "gpe", "--a", "1", "--b", "1",
                            "--periods", "6", "--format", "csv")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "ell,tau,norm,predicted_norm,partial_sum"
        assert len(lines) == 7
        last = lines[-1].split(",")
        assert float(last[2]) == pytest.approx(np.exp(-6.0), rel=1e-5)

    def test_schedule_file_json(self, capsys, tmp_path):
        s = gpe.GPESchedule((1.0, 0.5), (3.0, 1.5), (4.0, 6.0), tag="converges")
        path = tmp_path / "sched.json"
        gpe.save_schedule(s, str(path))
        code, doc = run_json(capsys, "gpe", "--signal", str(path))
        assert code == 0
        assert doc["verdict"] == "converges"
        assert len(doc["norms"]) == 2
        assert doc["max_rel_dev"] < 0.01


class TestVerify:
    def test_axis_example(self, capsys, tmp_path):
        path = tmp_path / "axis.json"
        signals.save_signal(signals.axis_hopping_control(1.0, 1.0, 2), str(path))
        code, doc = run_json(capsys, "verify", "--signal", str(path),
                             "--a", "1", "--b", "1", "--T", "1")
        assert code == 0
        assert doc["passed"] is True
        assert doc["checks"]["verify_int"]["satisfies"] is True

    def test_extremal_signal_gets_certificate(self, capsys, tmp_path):
        sig, _, _ = extremal2d.build_optimal_control(1.0, 3.0)
        path = tmp_path / "opt.json"
        signals.save_signal(sig, str(path))
        code, doc = run_json(capsys, "verify", "--signal", str(path),
                             "--a", "1", "--b", "3", "--T", "4")
        assert code == 0
        cert = doc["checks"]["verify_extremal"]
        assert cert["passed"] is True
        assert cert["control_alignment_gap"] < 1e-6

    def test_admissible_sample_passes_without_certificate(self, capsys, tmp_path):
        # an aperiodic admissible draw is PE but is not the extremal; it
        # must pass the window checks and never face the alignment gate
        sig = oracle.sample_admissible(1.0, 3.0, 12, rng_seed=3)
        path = tmp_path / "sample.json"
        signals.save_signal(sig, str(path))
        code, doc = run_json(capsys, "verify", "--signal", str(path),
                             "--a", "1", "--b", "3", "--T", "4")
        assert code == 0
        assert doc["passed"] is True
        assert "verify_extremal" not in doc["checks"]

    def test_wrong_bounds_fail(self, capsys, tmp_path):
        path = tmp_path / "axis.json"
        signals.save_signal(signals.axis_hopping_control(1.0, 1.0, 2), str(path))
        code, doc = run_json(capsys, "verify", "--signal", str(path),
                             "--a", "2", "--b", "2", "--T", "1")
        assert code == 1
        assert doc["passed"] is False
