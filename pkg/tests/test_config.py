"""
Tests for experiment configuration files and seed derivation
"""
import pytest

from src.errors import ConfigurationError, MissingInputError
from src.pipeline import ExperimentConfig, derive_seed
from src.pipeline.config import parse_config_values


def test_default_weights_follow_attack_count():
    cfg = ExperimentConfig(attack_count=4)
    assert cfg.alpha == [1.0] * 4
    assert cfg.lambda_cka == [1.0] * 4
    assert len(cfg.attack_specs()) == 4


def test_weight_length_mismatch():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(attack_count=3, alpha=[1.0, 1.0])


def test_negative_weight():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(beta=-1.0)


@pytest.mark.parametrize("overrides", [
    {"attack_count": 6},
    {"batch_size": 0},
    {"cka_mode": "rbf"},
    {"arch": "resnet"},
    {"train_fraction": 1.0},
    {"seeds": []},
    {"lr_expert": 0.0},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**overrides)


def test_new_attack_count_resets_weights():
    cfg = ExperimentConfig(alpha=[2.0, 3.0])
    grown = cfg.with_overrides(attack_count=3)
    assert grown.alpha == [1.0, 1.0, 1.0]
    assert cfg.with_overrides(beta=0.5).alpha == [2.0, 3.0]


def test_load_file(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text(
        "attack_count=3\n"
        "alpha=1.4,2.3,1.7\n"
        "seeds=4,5\n"
        "cka_center=true\n"
        "epsilon=0.05\n"
        "mlp_hidden=32,16\n"
        "cube_path=\n"
    )
    cfg = ExperimentConfig.load(path)
    assert cfg.attack_count == 3
    assert cfg.alpha == [1.4, 2.3, 1.7]
    assert cfg.seeds == [4, 5]
    assert cfg.cka_center is True
    assert cfg.epsilon == 0.05
    assert cfg.mlp_hidden == [32, 16]
    assert cfg.cube_path is None


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text("cka_mode=canonical\nseeds=1\n")
    cfg = ExperimentConfig.load(path, cka_mode="as_printed", seeds=[7, 8], arch=None)
    assert cfg.cka_mode == "as_printed"
    assert cfg.seeds == [7, 8]
    assert cfg.arch == "mlp"


def test_unknown_key_is_named(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text("epochs=3\nlearning_rate=0.1\n")
    with pytest.raises(ConfigurationError, match="learning_rate"):
        ExperimentConfig.load(path)


def test_unparseable_value():
    with pytest.raises(ConfigurationError, match="epochs"):
        parse_config_values({"epochs": "many"})


def test_missing_file(tmp_path):
    with pytest.raises(MissingInputError):
        ExperimentConfig.load(tmp_path / "absent.env")


def test_derive_seed():
    assert derive_seed(3, "victim") == derive_seed(3, "victim")
    assert derive_seed(3, "victim") != derive_seed(3, "baseline")
    assert derive_seed(3, "victim") != derive_seed(4, "victim")
