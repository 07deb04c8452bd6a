import copy
import tomllib

import pytest

import python.parsers as parsers
import python.utils as utils


@pytest.fixture
def config() -> dict:
    with open(utils.ROOT_FOLDER / "config.toml", "rb") as file:
        return tomllib.load(file)


def _parse(config: dict) -> parsers.InputParser:
    input_parser = parsers.InputParser(config=config)
    input_parser.parse_config()
    return input_parser


def test_shipped_configuration_parses(config):
    input_parser = _parse(config)
    assert input_parser.seed == utils.RANDOM_SEED
    assert input_parser.spike == {
        "omega": 2.0,
        "sample_rate_hz": 40000.0,
        "init": "zero",
    }
    assert input_parser.reconstruction == {"tfp_window": 6}
    assert input_parser.tfs["weight_w"] == 0.0001
    assert input_parser.tfs["recon_per_view_n"] == 18
    assert input_parser.deblur["trajectory_length"] == 18
    assert input_parser.metrics["ssim_window"] == 11


def test_integers_are_accepted_where_floats_are_meant(config):
    config["spike"]["omega"] = 2
    config["deblur"]["step"] = 1
    input_parser = _parse(config)
    assert isinstance(input_parser.spike["omega"], float)
    assert isinstance(input_parser.deblur["step"], float)


@pytest.mark.parametrize(
    "section, key, value",
    [
        ("spike", "omega", 0.0),
        ("spike", "init", "warm"),
        ("reconstruction", "tfp_window", 0),
        ("tfs", "weight_w", -0.1),
        ("tfs", "combine_mode", "max"),
        ("tfs", "target_mode", "events"),
        ("events", "theta", "half"),
        ("events", "log_intensity", "yes"),
        ("deblur", "trajectory_length", 1),
        ("metrics", "ssim_window", 0),
        ("run", "seed", -1),
    ],
)
def test_invalid_values_are_rejected(config, section, key, value):
    config[section][key] = value
    with pytest.raises(ValueError):
        _parse(config)


def test_missing_keys_are_rejected(config):
    broken = copy.deepcopy(config)
    del broken["tfs"]["weight_w"]
    with pytest.raises(ValueError):
        _parse(broken)
    del config["metrics"]
    with pytest.raises(ValueError):
        _parse(config)


@pytest.mark.parametrize(
    "section, key, value",
    [
        ("reconstruction", "tfp_window", 25),
        ("tfs", "recon_per_view_n", 19),
        ("deblur", "margin", 32),
        ("metrics", "ssim_window", 65),
    ],
)
def test_inconsistent_sections_are_rejected(config, section, key, value):
    config[section][key] = value
    with pytest.raises(ValueError):
        _parse(config)
