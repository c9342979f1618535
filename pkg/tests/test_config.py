import pytest

from edgesleep import config as C
from conftest import CONFIGS


def test_scenario_file_matches_reference_values(scenario_cfg):
    cfg = scenario_cfg
    assert (cfg.grid.rows, cfg.grid.cols) == (5, 5)
    assert cfg.users == 100
    assert cfg.services.count == 8
    assert cfg.services.request_rate == 100.0
    assert tuple(cfg.ec.capacity) == (5, 6)
    assert tuple(cfg.services.demand) == (1, 1)
    assert (cfg.power.p_peak, cfg.power.p_idle) == (243.0, 150.0)
    assert [s.power for s in cfg.power.states.values()] == [133.0, 97.0, 49.0]


def test_overrides_and_aliases(tiny_cfg, tmp_path):
    cfg = C.load_config(CONFIGS / "tiny.toml", dict([C.parse_override("t_max=0.005"),
                                                     C.parse_override("seed=9")]))
    assert cfg.services.latency_limit == 0.005
    assert cfg.sim.seed == 9
    assert C.parse_override("policy.name=sleepy") == ("policy.name", "sleepy")
    with pytest.raises(C.ConfigError):
        C.parse_override("nokey")


def test_missing_power_table_is_named(tmp_path):
    text = (CONFIGS / "tiny.toml").read_text()
    cut = text[:text.index("[power]")] + text[text.index("[lifecycle]"):]
    p = tmp_path / "bad.toml"
    p.write_text(cut)
    with pytest.raises(C.ConfigError, match="power"):
        C.load_config(p)


@pytest.mark.parametrize("key,value,field", [
    ("grid.rows", 0, "grid"),
    ("links.service_rate", 0.0, "links.service_rate"),
    ("services.latency_limit", -1.0, "services.latency_limit"),
    ("policy.name", "nope", "policy.name"),
    ("mobility.alpha", 1.5, "mobility.alpha"),
])
def test_field_level_errors(key, value, field):
    with pytest.raises(C.ConfigError, match=field.replace(".", r"\.")):
        C.load_config(CONFIGS / "tiny.toml", {key: value})


def test_dumps_round_trip(tiny_cfg):
    again = C.from_dict(tiny_cfg.to_dict())
    assert C.dumps(again) == C.dumps(tiny_cfg)
