"""TOML experiment configuration.

Sections and keys (``*`` marks required keys)::

    [experiment]   name, seeds*, policies*, out
    [model]        fp_flops*, activation_bits*, param_bits*, bp_ratio
    [system]       num_clients*, batch_size*, batches_per_round*, total_rounds*,
                   server_freq*, server_intensity, client_intensity,
                   subchannel_count*, total_bandwidth*, noise_psd*,
                   client_power_cap*, ms_power_cap*, es_power_cap*,
                   straggler_tolerance*, max_cut*, dataset_size
    [environment]  freq_mean*, freq_sd_ratio, gain_mean, gain_sd, path_loss
    [heterogeneity] level
    [ga]           any GAConfig field
    [sweep]        bandwidth, server_freq, server_power, heterogeneity (lists)

Scalar ``client_power_cap`` and ``freq_mean`` are fleet means.  With
heterogeneity level h in [0, 1) client k gets ``mean * (1 + h * u_k)`` where
u runs evenly from -1 to 1, so the fleet mean is unchanged while the spread
grows with h.  A list gives per-client values and is used as is.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import EnvStats
from .cutlayer import GAConfig
from .policies import POLICY_NAMES
from .profiles import ModelProfile, SystemProfile

SWEEP_AXES = ("bandwidth", "server_freq", "server_power", "heterogeneity")

_SCHEMA = {
    "experiment": {"name": False, "seeds": True, "policies": True, "out": False},
    "model": {"fp_flops": True, "activation_bits": True, "param_bits": True,
              "bp_ratio": False},
    "system": {"num_clients": True, "batch_size": True, "batches_per_round": True,
               "total_rounds": True, "server_freq": True, "server_intensity": False,
               "client_intensity": False, "subchannel_count": True,
               "total_bandwidth": True, "noise_psd": True, "client_power_cap": True,
               "ms_power_cap": True, "es_power_cap": True, "straggler_tolerance": True,
               "max_cut": True, "dataset_size": False},
    "environment": {"freq_mean": True, "freq_sd_ratio": False, "gain_mean": False,
                    "gain_sd": False, "path_loss": False},
    "heterogeneity": {"level": False},
    "ga": {f.name: False for f in fields(GAConfig)},
    "sweep": {axis: False for axis in SWEEP_AXES},
}
_REQUIRED_SECTIONS = ("experiment", "model", "system", "environment")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = str(path) if path is not None else "<config>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.line = line


def _find_line(text: str, section: str, key: str | None = None) -> int | None:
    """Line of ``[section]`` or of ``key`` inside it, by a plain scan."""
    current = None
    header = re.compile(r"^\s*\[([^\[\]]+)\]\s*(#.*)?$")
    for no, raw in enumerate(text.splitlines(), 1):
        m = header.match(raw)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            if re.match(rf"^\s*{re.escape(key)}\s*=", raw):
                return no
    return None


@dataclass(frozen=True)
class Scenario:
    model: ModelProfile
    sys: SystemProfile
    stats: EnvStats


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed configuration.  ``params`` keeps the raw sections so sweep
    points can be rebuilt with one value changed."""

    name: str
    seeds: tuple
    policies: tuple
    out: str
    heterogeneity: float
    ga: GAConfig
    sweep: dict
    params: dict = field(repr=False)
    path: str | None = None

    def scenario(self, axis: str | None = None, value=None) -> Scenario:
        """Profiles at the base point, or with one sweep axis set to ``value``."""
        return build_scenario(*self.point_params(axis, value))

    def point_key(self, axis: str | None = None, value=None) -> str:
        """Identical keys mean identical scenarios."""
        params, level = self.point_params(axis, value)
        return json.dumps([params, level], sort_keys=True)

    def point_params(self, axis: str | None = None, value=None) -> tuple[dict, float]:
        params = {s: dict(v) for s, v in self.params.items()}
        level = self.heterogeneity
        if axis == "bandwidth":
            params["system"]["total_bandwidth"] = value
        elif axis == "server_freq":
            params["system"]["server_freq"] = value
        elif axis == "server_power":
            params["system"]["ms_power_cap"] = value
            params["system"]["es_power_cap"] = value
        elif axis == "heterogeneity":
            level = value
        elif axis is not None:
            raise ValueError(f"unknown sweep axis {axis!r}")
        return params, float(level)


def spread(mean, level: float, k: int) -> np.ndarray:
    """Per-client values around ``mean`` for heterogeneity ``level``."""
    if not 0.0 <= level < 1.0:
        raise ValueError(f"heterogeneity level must lie in [0, 1), got {level}")
    arr = np.asarray(mean, dtype=float)
    if arr.ndim > 0:
        return arr
    return float(arr) * (1.0 + level * np.linspace(-1.0, 1.0, k))


def build_scenario(params: dict, level: float) -> Scenario:
    m, s, e = params["model"], params["system"], params["environment"]
    model = ModelProfile.from_layers(m["fp_flops"], m["activation_bits"], m["param_bits"],
                                     bp_ratio=m.get("bp_ratio", 2.0))
    k = int(s["num_clients"])
    count = int(s["subchannel_count"])
    sys = SystemProfile(
        num_clients=k,
        batch_size=s["batch_size"],
        batches_per_round=s["batches_per_round"],
        total_rounds=s["total_rounds"],
        server_freq=s["server_freq"],
        server_intensity=s.get("server_intensity", 1.0),
        client_intensity=s.get("client_intensity", 1.0),
        subchannel_count=count,
        subchannel_bandwidth=float(s["total_bandwidth"]) / count,
        noise_psd=s["noise_psd"],
        client_power_cap=spread(s["client_power_cap"], level, k),
        ms_power_cap=s["ms_power_cap"],
        es_power_cap=s["es_power_cap"],
        straggler_tolerance=s["straggler_tolerance"],
        max_cut=s["max_cut"],
        dataset_size=s.get("dataset_size", 1),
    )
    sys.check_model(model)
    freq_mean = spread(e["freq_mean"], level, k)
    stats = EnvStats(
        freq_mean=freq_mean,
        freq_sd=e.get("freq_sd_ratio", 0.1) * freq_mean,
        subchannel_count=count,
        gain_mean=e.get("gain_mean"),
        gain_sd=e.get("gain_sd"),
        path_loss=e.get("path_loss"),
    )
    if stats.num_clients != k:
        raise ValueError(f"freq_mean has {stats.num_clients} entries for {k} clients")
    return Scenario(model, sys, stats)


def parse_config(text: str, path=None) -> ExperimentConfig:
    """Parse and validate TOML ``text``; raises ConfigError with a line number."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax: {exc}", path, int(m.group(1)) if m else None) from None

    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", path, _find_line(text, section))
        if not isinstance(body, dict):
            raise ConfigError(f"{section} must be a table", path, None)
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", path,
                                  _find_line(text, section, key))
    for section in _REQUIRED_SECTIONS:
        if section not in raw:
            raise ConfigError(f"missing section [{section}]", path, None)
    for section, keys in _SCHEMA.items():
        for key, required in keys.items():
            if required and key not in raw.get(section, {}):
                raise ConfigError(f"missing key {key!r} in [{section}]", path,
                                  _find_line(text, section))

    def fail(section, key, message):
        raise ConfigError(f"[{section}] {key}: {message}", path, _find_line(text, section, key))

    exp = raw["experiment"]
    policies = exp["policies"]
    if not isinstance(policies, list) or not policies:
        fail("experiment", "policies", "need a non-empty list of policy names")
    policies = [str(p).upper() for p in policies]
    unknown = [p for p in policies if p not in POLICY_NAMES]
    if unknown:
        fail("experiment", "policies",
             f"unknown {unknown}; expected names from {', '.join(POLICY_NAMES)}")
    seeds = exp["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and s >= 0 for s in seeds):
        fail("experiment", "seeds", "need a non-empty list of non-negative integers")

    s = raw["system"]
    if int(s["subchannel_count"]) < int(s["num_clients"]):
        fail("system", "subchannel_count",
             f"{s['subchannel_count']} subchannels cannot serve {s['num_clients']} clients")

    level = raw.get("heterogeneity", {}).get("level", 0.0)
    if not isinstance(level, (int, float)) or not 0.0 <= level < 1.0:
        fail("heterogeneity", "level", "must be a number in [0, 1)")

    try:
        ga = GAConfig(**raw.get("ga", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[ga] {exc}", path, _find_line(text, "ga")) from None

    sweep = {}
    for axis, values in raw.get("sweep", {}).items():
        if not isinstance(values, list) or not values or not all(
                isinstance(v, (int, float)) and v >= 0 for v in values):
            fail("sweep", axis, "need a non-empty list of non-negative numbers")
        sweep[axis] = tuple(float(v) for v in values)

    params = {name: dict(raw.get(name, {})) for name in ("model", "system", "environment")}
    cfg = ExperimentConfig(
        name=str(exp.get("name", Path(path).stem if path else "experiment")),
        seeds=tuple(seeds), policies=tuple(policies), out=str(exp.get("out", "results")),
        heterogeneity=float(level), ga=ga, sweep=sweep, params=params,
        path=str(path) if path else None)

    # build every point once so bad profile values surface at load time
    points = [(None, None)] + [(a, v) for a, vals in sweep.items() for v in vals]
    for axis, value in points:
        try:
            cfg.scenario(axis, value)
        except (ValueError, TypeError, KeyError) as exc:
            label = "base point" if axis is None else f"sweep {axis}={value:g}"
            raise ConfigError(f"{label}: {exc}", path, None) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config(text, path)
