from pathlib import Path

import pytest

from magclimb._config import ClimbConfig, ConfigError, config_from_text, load_config
from magclimb.constants._constants import Ablation


def test_defaults_validate():
    config = ClimbConfig().validate()
    assert config.ablation is Ablation.FULL
    assert config.total_iterations == 35000
    assert config.network.actor_hidden == (256, 128, 64)


def test_scaled_iterations():
    config = load_config(overrides={"curriculum.scale": 0.01})
    assert config.total_iterations == 350


def test_file_and_flag_precedence(tmp_path: Path):
    path = tmp_path / "run.ini"
    path.write_text("[train]\nseed = 3\nnum_envs = 8\n\n[ppo]\nclip = 0.1\n")
    config = load_config(path, {"train.seed": 7, "ppo.epochs": None})
    assert config.train.seed == 7
    assert config.train.num_envs == 8
    assert config.ppo.clip == 0.1
    assert config.ppo.epochs == 4


def test_tuple_and_bool_parsing(tmp_path: Path):
    path = tmp_path / "run.ini"
    path.write_text("[eval]\nprobs = 1.0, 0.5\nrequire_survival = yes\n")
    config = load_config(path)
    assert config.eval.probs == (1.0, 0.5)
    assert config.eval.require_survival is True


@pytest.mark.parametrize(
    ("overrides", "field"),
    [
        ({"robot.nope": 1}, "robot.nope"),
        ({"nope.seed": 1}, "nope.seed"),
        ({"curriculum.scale": 1.5}, "curriculum.scale"),
        ({"curriculum.scale": 0.0}, "curriculum.scale"),
        ({"train.num_envs": "many"}, "train.num_envs"),
        ({"adhesion.ratio_at_reference": 1.2}, "adhesion.ratio_at_reference"),
        ({"contact.friction_range": "0.0, 2.0"}, "contact.friction_range"),
        ({"contact.friction_range": "0.5, 0.3"}, "contact.friction_range"),
        ({"contact.friction_range": "0.2, 0.4"}, "contact.friction_range"),
    ],
)
def test_invalid_fields_are_named(overrides, field):
    with pytest.raises(ConfigError) as err:
        load_config(overrides=overrides)
    assert err.value.field_name == field


def test_missing_file():
    with pytest.raises(ConfigError, match="does not exist"):
        load_config("does_not_exist.ini")


def test_invalid_ablation():
    with pytest.raises(ValueError, match="Valid options are"):
        load_config(overrides={"train.ablation": "no-gravity"})


def test_hash_is_stable_and_sensitive():
    a = load_config(overrides={"train.seed": 1})
    b = load_config(overrides={"train.seed": 1})
    c = load_config(overrides={"train.seed": 2})
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 12


def test_text_round_trip(tmp_path: Path):
    config = load_config(overrides={"train.ablation": "no-modeling", "eval.recovery_windows": "1.2,3.6"})
    assert config_from_text(config.to_text()) == config
    path = config.dump(tmp_path / "config.ini")
    assert load_config(path).config_hash == config.config_hash


def test_base_config_is_overridden():
    base = load_config(overrides={"train.seed": 5, "ppo.epochs": 2})
    config = load_config(overrides={"train.seed": 6}, base=base)
    assert config.train.seed == 6
    assert config.ppo.epochs == 2
