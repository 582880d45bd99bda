import copy

import pytest
import yaml

from couplergate.config import (ConfigError, TABLES, load_config, parse_config, scenario_config,
                                shipped_config)


@pytest.fixture
def raw():
    return copy.deepcopy(shipped_config("aba").raw)


@pytest.mark.parametrize("name", sorted(TABLES))
def test_shipped_tables_load(name):
    cfg = shipped_config(name)
    assert cfg.protocol.pair[0] == "Q1"
    assert cfg.device.dimension in (64, 256)


def test_units_converted(raw):
    cfg = parse_config(raw)
    assert cfg.device.mode("C").anharmonicity == pytest.approx(-0.4)
    assert cfg.device.coupling("Q1", "C") == pytest.approx(0.19)
    assert cfg.protocol.amplitude == pytest.approx(0.16)
    assert cfg.protocol.detuning == pytest.approx(-0.03)


def test_unknown_keys_rejected(raw):
    raw["device"]["modes"][0]["frequncy_GHz"] = 5.0
    with pytest.raises(ConfigError, match="frequncy_GHz"):
        parse_config(raw)
    raw = shipped_config("aba").raw
    raw = copy.deepcopy(raw)
    raw["extras"] = 1
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_schema_version_required(raw):
    raw["schema_version"] = 2
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_unknown_mode_in_protocol(raw):
    raw["protocols"]["ABA"]["coupler"] = "X"
    with pytest.raises(ConfigError, match="unknown mode"):
        parse_config(raw)


def test_levels_override_and_digest(raw):
    cfg = parse_config(raw)
    small = cfg.with_levels(3)
    assert small.device.dimension == 27
    assert small.digest() != cfg.digest()
    assert parse_config(copy.deepcopy(raw)).digest() == cfg.digest()


def test_scenarios():
    assert scenario_config("3Q-Q1Q3").protocol.pair == ("Q1", "Q3")
    with pytest.raises(ConfigError):
        scenario_config("nope")
    with pytest.raises(ConfigError):
        shipped_config("aba").with_scenario("ABC")


def test_load_from_file(tmp_path, raw):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(raw))
    assert load_config(path).digest() == parse_config(raw).digest()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("device: [unclosed")
    with pytest.raises(ConfigError):
        load_config(bad)
