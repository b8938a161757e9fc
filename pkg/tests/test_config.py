"""
Tests for the key=value run configuration.
"""

import pytest

from src.utils.config import DEFAULT_SEED, RunConfig, config_header, load_run_config, parse_config_file
from src.utils.errors import ConfigError


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# desk run\nseed=5\nepochs = 40\n\nlocal_to_global=off  # ablation\nnoise_sigma=0.25\n")
    return str(path)


def test_defaults():
    config = load_run_config(environ={})
    assert config.train.seed == config.data.seed == DEFAULT_SEED
    assert config.train.loss_lambda == 0.6
    assert config.train.learning_rate == 0.0002
    assert config.attention.d_model == config.fbc.n_atoms


def test_file_values_are_typed(config_file):
    config = load_run_config(config_file, environ={})
    assert config.train.epochs == 40
    assert config.train.local_to_global is False
    assert config.data.noise_sigma == 0.25
    assert config.data.seed == config.train.seed == 5


def test_precedence_flag_file_environment(config_file):
    env = {'MPN_SEED': '77'}
    assert load_run_config(environ=env).train.seed == 77
    assert load_run_config(config_file, environ=env).train.seed == 5
    assert load_run_config(config_file, {'seed': 11}, environ=env).train.seed == 11
    assert load_run_config(config_file, {'seed': None}, environ=env).train.seed == 5


def test_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("momentum=0.9\n")
    with pytest.raises(ConfigError, match="momentum"):
        load_run_config(str(path), environ={})


def test_line_without_equals(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("epochs 10\n")
    with pytest.raises(ConfigError, match=":1:"):
        parse_config_file(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / "absent.cfg"), environ={})


@pytest.mark.parametrize("key,value", [
    ('epochs', 'ten'), ('local_to_global', 'maybe'), ('epochs', '0'), ('loss_lambda', '1.5'),
    ('mcm_order', 'FF+SA'), ('squeeze', 'outer'), ('regime', 'semi'), ('n_atoms', '7'),
])
def test_invalid_values(key, value):
    with pytest.raises(ConfigError):
        load_run_config(overrides={key: value}, environ={})


def test_gate_width_must_match():
    with pytest.raises(ConfigError, match="d_model"):
        load_run_config(overrides={'n_atoms': 32}, environ={})


def test_lines_round_trip_through_copy():
    config = load_run_config(overrides={'epochs': 7, 'network': 'localization', 'local_to_global': False},
                             environ={})
    lines = config.to_lines()
    assert lines == sorted(lines)
    assert 'local_to_global=false' in lines
    clone = config.copy()
    assert clone == config
    clone.set('epochs', 8)
    assert config.train.epochs == 7


def test_config_header():
    assert config_header(['a=1', 'b=2']) == "# a=1\n# b=2\n"
    assert RunConfig().get('rank') == 4
