from pathlib import Path

import numpy as np
import pytest

from hsfl.config import ConfigError, load_config, parse_config, spread

ROOT = Path(__file__).resolve().parents[1]
TINY = Path(__file__).with_name("tiny.toml")


def tiny_text():
    return TINY.read_text()


@pytest.mark.parametrize("name", ["desk", "default"])
def test_shipped_configs_load(name):
    cfg = load_config(ROOT / "configs" / f"{name}.toml")
    assert cfg.policies == ("OPT", "RCLS", "SCLS", "ECFA", "GTRA", "ETRA")
    assert set(cfg.sweep) == {"bandwidth", "server_freq", "server_power", "heterogeneity"}


def test_default_matches_reference_values():
    scen = load_config(ROOT / "configs" / "default.toml").scenario()
    sys = scen.sys
    assert sys.subchannel_count == 10
    assert sys.subchannel_count * sys.subchannel_bandwidth == pytest.approx(10e6)
    assert sys.noise_psd == 1e-3
    assert sys.ms_power_cap == sys.es_power_cap == 100.0
    assert sys.server_freq == 100e10
    caps = sys.client_power_cap
    assert caps.min() >= 1.0 and caps.max() <= 10.0
    assert scen.stats.freq_mean.max() <= 1e11


def test_spread_keeps_the_mean():
    vals = spread(4.0, 0.5, 5)
    np.testing.assert_allclose(vals, [2, 3, 4, 5, 6])
    np.testing.assert_array_equal(spread(4.0, 0.0, 3), [4, 4, 4])
    np.testing.assert_array_equal(spread([1.0, 7.0], 0.9, 2), [1, 7])
    with pytest.raises(ValueError):
        spread(1.0, 1.0, 3)


def test_heterogeneity_sweep_changes_only_spread():
    cfg = parse_config(tiny_text().replace("bandwidth = [5e6, 10e6]", "heterogeneity = [0.0, 0.5]"))
    flat = cfg.scenario("heterogeneity", 0.0)
    np.testing.assert_array_equal(flat.sys.client_power_cap, [5.0, 5.0])
    assert cfg.point_key("heterogeneity", 0.5) == cfg.point_key()
    assert cfg.point_key("heterogeneity", 0.0) != cfg.point_key()


def test_sweep_axes_map_to_profile_fields():
    cfg = parse_config(tiny_text())
    assert cfg.scenario("bandwidth", 5e6).sys.subchannel_bandwidth == pytest.approx(5e6 / 3)
    power = cfg.scenario("server_power", 7.0).sys
    assert power.ms_power_cap == power.es_power_cap == 7.0
    with pytest.raises(ValueError):
        cfg.scenario("rounds", 3)


def test_empty_policies_rejected():
    with pytest.raises(ConfigError, match="policies"):
        parse_config(tiny_text().replace('["OPT", "SCLS", "ECFA"]', "[]"))


def test_unknown_policy_rejected():
    with pytest.raises(ConfigError, match="FAST"):
        parse_config(tiny_text().replace('"SCLS"', '"FAST"'))


def test_unknown_key_reports_line():
    text = tiny_text().replace("path_loss = 1e-4", "path_loss = 1e-4\nshadowing = 2.0")
    line = text.splitlines().index("shadowing = 2.0") + 1
    with pytest.raises(ConfigError) as err:
        parse_config(text, "x.toml")
    assert err.value.line == line
    assert f"x.toml:{line}:" in str(err.value)


def test_syntax_error_reports_line():
    text = tiny_text().replace("batch_size = 32", "batch_size = = 32")
    line = text.splitlines().index("batch_size = = 32") + 1
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line


def test_too_few_subchannels():
    with pytest.raises(ConfigError, match="subchannels"):
        parse_config(tiny_text().replace("subchannel_count = 3", "subchannel_count = 1"))


def test_missing_required_key():
    with pytest.raises(ConfigError, match="noise_psd"):
        parse_config(tiny_text().replace("noise_psd = 1e-3\n", ""))


def test_bad_values_caught_at_load():
    with pytest.raises(ConfigError):
        parse_config(tiny_text().replace("max_cut = [2, 3]", "max_cut = [2, 9]"))
    with pytest.raises(ConfigError):
        parse_config(tiny_text().replace("level = 0.5", "level = 1.5"))
    with pytest.raises(ConfigError):
        load_config(TINY.with_name("missing.toml"))
