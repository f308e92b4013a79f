"""Command-line surface: exit codes, artifacts, determinism."""

import json
import os

import pytest

from escapesim.cli import main
from escapesim.model import barebones, save_model


def run(argv):
    return main(argv)


class TestValidateCommand:
    def test_builtin_ok(self, tmp_path, capsys):
        assert run(["validate", "--builtin", "barebones", "--a1", "1",
                    "--a2", "3", "--gamma", "0.6", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "valid" in out

    def test_model_file_ok(self, tmp_path):
        path = tmp_path / "m.json"
        save_model(barebones(1, 3, 0.6), str(path))
        assert run(["validate", "--model", str(path), "--out", str(tmp_path)]) == 0

    def test_malformed_model_file(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x", "d": 2, "d1": 1, "N": 10, "x0": [1, 0],'
                        ' "jumps": [], "bogus": 1}')
        assert run(["validate", "--model", str(path), "--out", str(tmp_path)]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_invalid_regime_is_failure(self, tmp_path, capsys):
        assert run(["validate", "--builtin", "barebones", "--gamma", "4.0",
                    "--out", str(tmp_path)]) == 1

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["no-such-command"])
        assert exc.value.code == 2

    def test_help_for_every_subcommand(self, capsys):
        for cmd in ["validate", "simulate", "branching", "flow", "couple", "tv",
                    "escape", "extinction", "three-phase", "closeness",
                    "envelopes", "reproduce"]:
            with pytest.raises(SystemExit) as exc:
                run([cmd, "--help"])
            assert exc.value.code == 0
            assert capsys.readouterr().out


class TestArtifacts:
    def test_simulate_writes_csvs(self, tmp_path):
        assert run(["simulate", "--builtin", "barebones", "--N", "500",
                    "--horizon", "0.5", "--seed", "3",
                    "--out", str(tmp_path)]) == 0
        traj = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert traj[0] == "t,comp_0,comp_1"
        events = (tmp_path / "events.csv").read_text().splitlines()
        assert events[0] == "t,jump_index"
        meta = json.loads((tmp_path / "simulate.json").read_text())
        assert meta["terminal"] == "horizon"
        assert "build" in meta

    def test_tv_command(self, tmp_path, capsys):
        assert run(["tv", "--N", "2000", "--m", "80", "--replicas", "500",
                    "--seed", "5", "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "tv.json").read_text())
        assert payload["m"] == 80

    def test_branching_command(self, tmp_path, capsys):
        assert run(["branching", "--builtin", "barebones", "--replicas", "2000",
                    "--seed", "1", "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "branching.json").read_text())
        assert abs(payload["survival"] - 0.8) < 0.05

    def test_flow_command(self, tmp_path):
        assert run(["flow", "--builtin", "barebones", "--T", "3.0",
                    "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "flow.json").read_text())
        assert payload["max_voc_residual"] < 1e-6

    def test_envelopes_command(self, tmp_path):
        assert run(["envelopes", "--builtin", "barebones",
                    "--eps-grid", "1e-3,1e-4", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "envelopes.csv").read_text().splitlines()
        assert lines[0] == "bound_id,eps,delta,fitted_constant,pass"


class TestPresetSmoke:
    # tiny replica counts: exercises the wiring, not the statistics
    def test_survival_preset(self, tmp_path):
        code = run(["reproduce", "--experiment", "survival", "--N", "1000",
                    "--replicas", "400", "--seed", "2", "--out", str(tmp_path)])
        assert (tmp_path / "reproduce_survival.json").exists()
        assert code in (0, 1)

    def test_escape_scaling_preset_artifacts(self, tmp_path):
        # full preset is heavy; only check rejection of bad usage here
        with pytest.raises(SystemExit):
            run(["reproduce", "--experiment", "unknown-name"])

    def test_w_shape_preset(self, tmp_path):
        code = run(["reproduce", "--experiment", "w-shape", "--replicas", "500",
                    "--seed", "2", "--out", str(tmp_path)])
        payload = json.loads((tmp_path / "reproduce_w_shape.json").read_text())
        assert len(payload["rows"]) == 3
        assert code in (0, 1)

    def test_infrastructure_preset(self, tmp_path):
        code = run(["reproduce", "--experiment", "infrastructure",
                    "--replicas", "500", "--seed", "2", "--out", str(tmp_path)])
        assert code == 0


class TestDeterminism:
    def test_reproduce_preset_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["reproduce", "--experiment", "tv-breakdown",
                        "--N", "2000", "--replicas", "2000", "--seed", "9",
                        "--out", str(out)]) == 0
        assert (a / "reproduce_tv.json").read_bytes() == (b / "reproduce_tv.json").read_bytes()

    def test_env_seed_override(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("ESCAPE_SEED", "9")
        assert run(["tv", "--N", "2000", "--m", "50", "--replicas", "300",
                    "--seed", "12345", "--out", str(a)]) == 0
        monkeypatch.delenv("ESCAPE_SEED")
        assert run(["tv", "--N", "2000", "--m", "50", "--replicas", "300",
                    "--seed", "9", "--out", str(b)]) == 0
        assert (a / "tv.json").read_bytes() == (b / "tv.json").read_bytes()

    def test_timestamps_only_in_sidecar(self, tmp_path):
        assert run(["tv", "--N", "2000", "--m", "50", "--replicas", "200",
                    "--seed", "1", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "runinfo.log").exists()
        payload = json.loads((tmp_path / "tv.json").read_text())
        assert "timestamp" not in payload
        assert not any("time" in k for k in payload)
