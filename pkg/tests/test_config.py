import pytest

from frictionid.config import ConfigError, ExperimentConfig, load_config, parse_config
from frictionid.harness import standard_scenario
from frictionid.identifier import IdentifierConfig


def test_defaults_match_library_defaults():
    cfg = load_config(None)
    assert cfg.scenario_config() == standard_scenario("slippery", 0, base_mass=10.0)
    assert cfg.identifier_config() == IdentifierConfig(seed=0)
    assert cfg.identifier_config("nonsmooth").gradient_method == "nonsmooth"
    assert len(cfg.sweep.initials) == 20 and cfg.sweep.initials[-1] == 1.0


def test_empty_document_is_defaults():
    assert parse_config("") == ExperimentConfig()


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="identifier.alpha_rje"):
        parse_config("identifier:\n  alpha_rje: 0.3\n")


def test_bad_value_is_named():
    with pytest.raises(ConfigError, match="scenario.duration"):
        parse_config("scenario:\n  duration: -1\n")


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("seed: 1\nscenario:\n  name: a: b\n", "x.yaml")


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        parse_config("- 1\n- 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "nope.yaml"))


def test_invalid_scenario_and_identifier_values_raise_config_error():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config("scenario:\n  name: icy\n").scenario_config()
    with pytest.raises(ConfigError, match="identifier"):
        parse_config("identifier:\n  mu_min: 0.9\n  mu_max: 0.1\n").identifier_config()


def test_overrides_reach_scenario(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "seed: 4\nmodel:\n  base_mass: 12\nscenario:\n  name: switching\n  duration: 2\n"
        "  terrain: [[0, 1, 1.0], [1, 2, 0.19]]\n  noise: {position_std: 0, velocity_std: 0}\n"
    )
    sc = load_config(str(path)).scenario_config()
    assert sc.seed == 4 and sc.base_mass == 12 and sc.duration == 2
    assert sc.terrain.mu_at(1.5) == 0.19 and sc.noise.velocity_std == 0


def test_dump_round_trips():
    cfg = parse_config("seed: 3\nidentifier:\n  rho_t: 0.1\nsweep:\n  rho_values: [0.5]\n")
    assert parse_config(cfg.dump()) == cfg
