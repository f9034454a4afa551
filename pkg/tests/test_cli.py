"""Command-line interface: subcommands, exit codes, phase-tagged errors."""

import json

import numpy as np
import pytest

from groupattr.cli import main

from conftest import tiny_experiment_config


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "config.json"
    tiny_experiment_config().to_json(path)
    return path


class TestSubcommands:
    def test_gen_data(self, config_path, tmp_path, capsys):
        rc = main(["gen-data", "--config", str(config_path), "--out", str(tmp_path)])
        assert rc == 0
        assert "3 groups" in capsys.readouterr().out
        assert (tmp_path / "dataset.npz").exists()

    def test_phase_chain_through_cli(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "run")
        assert main(["train-full", "--config", str(config_path), "--out", out]) == 0
        assert main(["train-logo", "--group", "1", "--config", str(config_path),
                     "--out", out]) == 0
        assert main(["unlearn", "--group", "1", "--method", "retrack",
                     "--config", str(config_path), "--out", out]) == 0
        assert main(["attribute", "--method", "prototype",
                     "--config", str(config_path), "--out", out]) == 0
        capsys.readouterr()
        # evaluate materializes all remaining phases on demand.
        assert main(["evaluate", "--gold", "logoa", "--config", str(config_path),
                     "--out", out]) == 0
        assert "logoa" in capsys.readouterr().out
        assert main(["report", "--config", str(config_path), "--out", out]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert "methods" in rep

    def test_cond_anchor_method_name_mapping(self, tmp_path):
        from groupattr.harness import UnlearnSpec

        cfg = tiny_experiment_config(unlearn_methods=(
            UnlearnSpec(method="cond_anchor", steps_or_epochs=2, lr=1e-4,
                        timestep_range=(1, 40)),
        ))
        cfg_path = tmp_path / "cfg.json"
        cfg.to_json(cfg_path)
        rc = main(["unlearn", "--group", "0", "--method", "cond-anchor",
                   "--config", str(cfg_path), "--out", str(tmp_path / "run")])
        assert rc == 0
        assert (tmp_path / "run" / "checkpoints" / "unlearn_cond_anchor_0.ckpt").exists()

    def test_seed_override_changes_outputs(self, config_path, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["gen-data", "--config", str(config_path), "--out", a]) == 0
        assert main(["gen-data", "--config", str(config_path), "--seed", "99",
                     "--out", b]) == 0
        with np.load(f"{a}/dataset.npz") as za, np.load(f"{b}/dataset.npz") as zb:
            assert not np.array_equal(za["group_0"], zb["group_0"])

    def test_run_subcommand(self, config_path, tmp_path, capsys):
        rc = main(["run", "--config", str(config_path), "--out", str(tmp_path / "all")])
        assert rc == 0
        reports = json.loads(capsys.readouterr().out)
        assert reports["logoa"]["top1"] == 1.0


class TestFailures:
    def test_unconfigured_attribute_method_fails_with_phase_tag(
        self, config_path, tmp_path, capsys
    ):
        rc = main(["attribute", "--method", "cond_anchor",
                   "--config", str(config_path), "--out", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("[")
        assert "cond_anchor" in err

    def test_bad_group_index_fails(self, config_path, tmp_path, capsys):
        rc = main(["train-logo", "--group", "9", "--config", str(config_path),
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "[train_logo]" in capsys.readouterr().err

    def test_missing_timing_records_fails(self, config_path, tmp_path, capsys):
        rc = main(["report", "--config", str(config_path),
                   "--out", str(tmp_path / "empty")])
        assert rc == 1
        assert "[report]" in capsys.readouterr().err

    def test_sweep_requires_known_axis(self, config_path, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", "--axis", "bogus", "--values", "1",
                  "--config", str(config_path), "--out", str(tmp_path)])


class TestSweepCommand:
    def test_sweep_lambda(self, config_path, tmp_path, capsys):
        rc = main(["sweep", "--axis", "lambda", "--values", "0.03",
                   "--config", str(config_path), "--out", str(tmp_path / "sw")])
        assert rc == 0
        rows = json.loads(capsys.readouterr().out)
        assert rows[0]["value"] == "0.03"
        assert (tmp_path / "sw" / "sweep_lambda.csv").exists()
