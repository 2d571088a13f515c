import json
import os

import pytest

from obsplan.cli import main

SMALL_CONFIG = """
version: 1
seed: 11
horizon: 12
method: both
n_planning_samples: 2
n_eval_trajectories: 2
n_runs: 2
waypoints:
  - {position: [0.0, 0.0, 0.0], handrail: true}
  - {position: [2.0, 1.0, 0.0]}
task:
  name: deskcheck
  orientation_stddev: 0.05
  segments:
    - {position: [2.5, 0.0, 0.0], yaw_deg: 180, duration_mean: 6,
       duration_stddev: 1, position_stddev: [0.05, 0.05, 0.02], motion: dwell}
    - {position: [3.0, 1.0, 0.0], yaw_deg: 180, duration_mean: 6,
       duration_stddev: 1, motion: dwell}
scenario:
  name: lenient
  weights: [1.0, 0.0, 0.0, 0.0]
  thresholds: [12.0, 12.0, 12.0]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(SMALL_CONFIG)
    return str(path)


class TestEvaluate:
    def test_full_pipeline_artifacts(self, config_file, tmp_path):
        out = str(tmp_path / "results")
        assert main(["evaluate", "--config", config_file, "--out", out]) == 0
        names = sorted(os.listdir(out))
        assert "runs.csv" in names
        assert "aggregates.csv" in names
        assert "fig_deskcheck.png" in names
        assert "metadata.json" in names
        assert "config.yaml" in names
        assert "policy_deskcheck_lenient_momdp.txt" in names
        assert "policy_deskcheck_lenient_cmdp.txt" in names

        runs = (tmp_path / "results" / "runs.csv").read_text().strip().splitlines()
        assert len(runs) == 1 + 2 * 2 * 2  # methods x trajectories x runs
        meta = json.loads((tmp_path / "results" / "metadata.json").read_text())
        assert meta["config"]["horizon"] == 12
        assert any(k.endswith("momdp") for k in meta["timings_ms"])

    def test_byte_identical_reruns(self, config_file, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["evaluate", "--config", config_file, "--out", out1]) == 0
        assert main(["evaluate", "--config", config_file, "--out", out2]) == 0
        for name in ("runs.csv", "aggregates.csv"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b

    def test_seed_override_changes_rollouts(self, config_file, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["evaluate", "--config", config_file, "--out", out1]) == 0
        assert main(
            ["evaluate", "--config", config_file, "--out", out2, "--seed", "99"]
        ) == 0
        a = (tmp_path / "a" / "runs.csv").read_bytes()
        b = (tmp_path / "b" / "runs.csv").read_bytes()
        assert a != b


class TestErrors:
    def test_empty_config_nonzero_exit(self, tmp_path, capsys):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        code = main(["evaluate", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_unsatisfiable_thresholds_exit_and_cleanup(self, tmp_path, capsys):
        bad = SMALL_CONFIG.replace("[12.0, 12.0, 12.0]", "[12.0, 12.0, 0.0]")
        path = tmp_path / "bad.yaml"
        path.write_text(bad)
        out = tmp_path / "results"
        code = main(["evaluate", "--config", str(path), "--out", str(out)])
        assert code == 3
        assert "c2" in capsys.readouterr().err
        # Partial artifacts must not survive a failed run.
        assert not (out / "runs.csv").exists()
        assert not (out / ".staging").exists()

    def test_momdp_only_ignores_missing_thresholds(self, tmp_path):
        cfg = SMALL_CONFIG.replace("method: both", "method: momdp").replace(
            "  thresholds: [12.0, 12.0, 12.0]\n", "")
        path = tmp_path / "momdp.yaml"
        path.write_text(cfg)
        out = str(tmp_path / "results")
        assert main(["evaluate", "--config", str(path), "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "policy_deskcheck_lenient_momdp.txt"))


class TestOtherVerbs:
    def test_solve_writes_policies_only(self, config_file, tmp_path):
        out = str(tmp_path / "solved")
        assert main(["solve", "--config", config_file, "--out", out]) == 0
        names = sorted(os.listdir(out))
        assert "policy_deskcheck_lenient_momdp.txt" in names
        assert "runs.csv" not in names

    def test_export_lp(self, config_file, tmp_path):
        out = str(tmp_path / "lps")
        assert main(["export-lp", "--config", config_file, "--out", out]) == 0
        path = os.path.join(out, "lp_deskcheck_lenient.lp")
        assert os.path.exists(path)
        text = open(path).read()
        assert "Maximize" in text and "Subject To" in text

    def test_sample_traj(self, config_file, tmp_path):
        out = str(tmp_path / "trajs")
        assert main(["sample-traj", "--config", config_file, "--out", out]) == 0
        names = sorted(os.listdir(out))
        assert "traj_deskcheck_plan0.csv" in names
        assert "traj_deskcheck_eval1.csv" in names

    def test_method_override(self, config_file, tmp_path):
        out = str(tmp_path / "only_cmdp")
        assert main(
            ["solve", "--config", config_file, "--out", out, "--method", "cmdp"]
        ) == 0
        names = sorted(os.listdir(out))
        assert "policy_deskcheck_lenient_cmdp.txt" in names
        assert "policy_deskcheck_lenient_momdp.txt" not in names
