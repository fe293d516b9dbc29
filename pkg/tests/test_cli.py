from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from loguru import logger

from magclimb.__main__ import _SINKS, cli
from magclimb._config import load_config
from magclimb.constants._pkg_constants import Key
from magclimb.utils._utils import read_header, read_table


@pytest.fixture(autouse=True)
def _reset_sinks():
    yield
    for sink in _SINKS:
        logger.remove(sink)
    _SINKS.clear()


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def tiny_ini(tmp_path: Path) -> Path:
    config = load_config(
        overrides={
            "curriculum.scale": 0.01,
            "train.num_envs": 2,
            "train.checkpoint_interval": 2,
            "ppo.rollout_steps": 4,
            "ppo.minibatches": 2,
            "ppo.epochs": 1,
            "network.actor_hidden": "8",
            "network.critic_hidden": "8",
            "network.estimator_hidden": "8",
        }
    )
    return config.dump(tmp_path / "tiny.ini")


def test_help(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("train", "eval", "inspect", "replay"):
        assert command in result.output


def test_usage_errors_exit_with_one(runner, tmp_path):
    assert runner.invoke(cli, ["inspect", "--bogus"]).exit_code == 1
    assert runner.invoke(cli, ["inspect", "--scale", "2.0"]).exit_code == 1
    assert runner.invoke(cli, ["inspect", "--config", str(tmp_path / "missing.ini")]).exit_code == 1
    assert runner.invoke(cli, ["inspect", "--at", "1,x"]).exit_code == 1
    assert runner.invoke(cli, ["eval"]).exit_code == 1


def test_runtime_errors_exit_with_two(runner, tmp_path):
    result = runner.invoke(cli, ["eval", "--checkpoint", str(tmp_path / "missing.pt")])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["replay", str(tmp_path)])
    assert result.exit_code == 2


def test_inspect_at(runner, tmp_path):
    out = tmp_path / "schedule.tsv"
    result = runner.invoke(cli, ["inspect", "--at", "35000,11200", "--out", str(out)])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert abs(table["prob_attach"][0] - 0.85) < 1e-12
    assert abs(table["theta"][1] - np.pi / 4) < 1e-12
    assert "config_hash" in read_header(out)


def test_inspect_no_curriculum(runner, tmp_path):
    out = tmp_path / "schedule.tsv"
    plot = tmp_path / "schedule.png"
    result = runner.invoke(
        cli, ["inspect", "--ablation", "no-curriculum", "--step", "1000", "--out", str(out), "--plot", str(plot)]
    )
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert len(table) > 1
    np.testing.assert_array_equal(table["theta"], np.pi / 2)
    assert plot.stat().st_size > 0


def test_train_eval_replay(runner, tmp_path, tiny_ini):
    run = tmp_path / "train"
    result = runner.invoke(
        cli, ["train", "--config", str(tiny_ini), "--out", str(run), "--iterations", "2", "--seed", "7", "--no-plot"]
    )
    assert result.exit_code == 0, result.output
    checkpoint = run / Key.run.checkpoints / Key.run.checkpoint(2)
    assert checkpoint.is_file()
    assert (run / Key.run.curves).is_file()
    assert (run / Key.run.log).is_file()

    evaluation = tmp_path / "eval"
    args = ["eval", "--checkpoint", str(checkpoint), "--baseline", "scripted", "--out", str(evaluation)]
    args += ["--episodes", "2", "--horizon", "0.2", "--prob", "1.0,0.85", "--dt", "0.05,0.1"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert "sub-protocol (N=2)" in result.output
    assert "Recovery: same-foot reattachment" in result.output
    metrics = read_table(evaluation / Key.run.metrics)
    assert set(metrics["condition"]) == {"Full", "Scripted crawl"}
    assert {"recovery_0.05", "recovery_0.1"} <= set(metrics["metric"])
    assert len(list((evaluation / Key.run.episodes).glob("*.jsonl"))) == 8

    result = runner.invoke(cli, ["replay", str(evaluation)])
    assert result.exit_code == 0, result.output
    assert "Metrics match." in result.output
