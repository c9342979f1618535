"""Scenario configuration: dataclasses, TOML loading and ``key=value`` overrides.

All durations are seconds, powers watts, rates per second.
"""
from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import tomli


class ConfigError(ValueError):
    """Raised for invalid or incomplete scenario configuration."""


@dataclass
class GridConfig:
    rows: int = 5
    cols: int = 5
    cell_size: float = 100.0  # metres per square cell


@dataclass
class LinkConfig:
    service_rate: float = 20000.0  # packets/s per link
    proc_time: float = 0.001  # per-hop packet processing


@dataclass
class ECConfig:
    cores: int = 5
    capacity: tuple = (5, 6)  # (cpu, memory)


@dataclass
class SleepStateConfig:
    power: float
    down_delay: float
    up_delay: float
    down_power: float
    up_power: float


def _default_sleep_states() -> dict:
    return {
        "S1": SleepStateConfig(133.0, 2.0, 2.0, 140.0, 144.0),
        "S3": SleepStateConfig(97.0, 4.0, 10.0, 100.0, 128.0),
        "S4": SleepStateConfig(49.0, 9.0, 48.0, 60.0, 95.0),
    }


@dataclass
class PowerConfig:
    p_peak: float = 243.0
    p_idle: float = 150.0
    # ordered shallow -> deep
    states: dict = field(default_factory=_default_sleep_states)


@dataclass
class LifecycleConfig:
    t_start: float = 0.510
    t_stop: float = 0.510
    t_pause: float = 0.096
    t_resume: float = 0.096


@dataclass
class ServiceConfig:
    count: int = 8
    demand: tuple = (1, 1)
    request_rate: float = 100.0  # per user
    latency_limit: float = 0.007


@dataclass
class MobilityConfig:
    alpha: float = 0.75
    mean_speed: float = 1.4
    mean_direction: float | None = None  # None: per-user uniform random heading
    speed_sigma: float = 0.3
    direction_sigma: float = 0.3
    step_dt: float = 1.0


@dataclass
class QueueConfig:
    service_rate: float = 2000.0  # user requests/s per core
    service_law: str = "exponential"  # or "deterministic"


@dataclass
class PolicyConfig:
    name: str = "pnap"  # pnap | pnap_p | pnap_sa | pnap_t | sleepy | reactive | always_on
    offload_margin: float | None = None  # None: variant default
    sa_idle_threshold: float | None = None  # None: horizon length
    wake_margin: float = 5.0
    tick_dt: float = 5.0
    service_time_budget: float | None = None  # None: 99th pct of service time
    sleepy_state: str = "S2"
    sleepy_table: SleepStateConfig = field(
        default_factory=lambda: SleepStateConfig(115.0, 3.0, 6.0, 120.0, 136.0)
    )
    reactive_solver: str = "greedy"  # greedy | exact


@dataclass
class ForecastConfig:
    kind: str = "oracle"  # oracle | persistence | ewma | file
    horizon: int = 12
    step_dt: float = 5.0
    ewma_weight: float = 0.5
    path: str | None = None


@dataclass
class ObjectiveConfig:
    w_power: float = 1.0
    w_violation: float = 1.0


@dataclass
class SimConfig:
    duration: float = 3600.0
    seed: int = 1
    warmup: float = 0.0


@dataclass
class SweepConfig:
    t_max: list = field(default_factory=lambda: [0.003, 0.005, 0.007, 0.009])
    policies: list = field(default_factory=lambda: ["pnap", "sleepy", "reactive", "always_on"])
    seeds: list = field(default_factory=lambda: [1, 2, 3])


@dataclass
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    links: LinkConfig = field(default_factory=LinkConfig)
    t_wireless: float = 0.001
    ec: ECConfig = field(default_factory=ECConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    services: ServiceConfig = field(default_factory=ServiceConfig)
    users: int = 100
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    queue: QueueConfig = field(default_factory=QueueConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> "ScenarioConfig":
        validate(self)
        return self

    def to_dict(self) -> dict:
        return to_dict(self)

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        data = self.to_dict()
        for key, value in overrides.items():
            _set_path(data, key, value)
        return from_dict(data)


REQUIRED_SECTIONS = ("grid", "power")

# short aliases accepted by --set
ALIASES = {
    "t_max": "services.latency_limit",
    "seed": "sim.seed",
    "duration": "sim.duration",
    "policy": "policy.name",
}


def to_dict(obj) -> Any:
    if is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {k: to_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a table, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path + '.' if path else ''}{key}: unknown field")
    kwargs = {}
    for name, f in known.items():
        fpath = f"{path}.{name}" if path else name
        if name not in data:
            continue
        value = data[name]
        sub = _nested_type(cls, name)
        if sub is not None:
            kwargs[name] = _build(sub, value, fpath)
        elif cls is PowerConfig and name == "states":
            kwargs[name] = _build_states(value, fpath)
        elif isinstance(f.default, tuple):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:  # missing required fields of SleepStateConfig
        raise ConfigError(f"{path}: {exc}") from None


_NESTED = {
    (ScenarioConfig, "grid"): GridConfig,
    (ScenarioConfig, "links"): LinkConfig,
    (ScenarioConfig, "ec"): ECConfig,
    (ScenarioConfig, "power"): PowerConfig,
    (ScenarioConfig, "lifecycle"): LifecycleConfig,
    (ScenarioConfig, "services"): ServiceConfig,
    (ScenarioConfig, "mobility"): MobilityConfig,
    (ScenarioConfig, "queue"): QueueConfig,
    (ScenarioConfig, "policy"): PolicyConfig,
    (ScenarioConfig, "forecast"): ForecastConfig,
    (ScenarioConfig, "objective"): ObjectiveConfig,
    (ScenarioConfig, "sim"): SimConfig,
    (ScenarioConfig, "sweep"): SweepConfig,
    (PolicyConfig, "sleepy_table"): SleepStateConfig,
}


def _nested_type(cls, name):
    return _NESTED.get((cls, name))


def _build_states(value, path):
    if not isinstance(value, dict) or not value:
        raise ConfigError(f"{path}: sleep state table is missing or empty")
    return {k: _build(SleepStateConfig, v, f"{path}.{k}") for k, v in value.items()}


def from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, copy.deepcopy(data), "").validate()


def load_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in REQUIRED_SECTIONS:
        if section not in raw:
            raise ConfigError(f"{section}: required table missing from {path.name}")
    if "states" not in raw["power"]:
        raise ConfigError("power.states: sleep state table missing")
    for key, value in (overrides or {}).items():
        _set_path(raw, key, value)
    return from_dict(raw)


def parse_override(text: str) -> tuple[str, Any]:
    """Parse ``key=value``; the value is read as a TOML literal, else a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key, value


def _set_path(data: dict, key: str, value) -> None:
    key = ALIASES.get(key, key)
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: {part} is not a table")
    node[parts[-1]] = value


def validate(cfg: ScenarioConfig) -> None:
    def need(cond, name, msg):
        if not cond:
            raise ConfigError(f"{name}: {msg}")

    need(cfg.grid.rows >= 1 and cfg.grid.cols >= 1, "grid", "rows and cols must be >= 1")
    need(cfg.grid.cell_size > 0, "grid.cell_size", "must be > 0")
    need(cfg.links.service_rate > 0, "links.service_rate", "must be > 0")
    need(cfg.links.proc_time >= 0, "links.proc_time", "must be >= 0")
    need(cfg.t_wireless >= 0, "t_wireless", "must be >= 0")
    need(cfg.ec.cores >= 1, "ec.cores", "must be >= 1")
    need(all(c >= 0 for c in cfg.ec.capacity), "ec.capacity", "components must be >= 0")
    need(len(cfg.services.demand) == len(cfg.ec.capacity), "services.demand",
         "must have as many components as ec.capacity")
    need(all(d <= c for d, c in zip(cfg.services.demand, cfg.ec.capacity)),
         "services.demand", "exceeds EC capacity")
    need(cfg.services.count >= 1, "services.count", "must be >= 1")
    need(cfg.services.latency_limit > 0, "services.latency_limit", "must be > 0")
    need(cfg.services.request_rate > 0, "services.request_rate", "must be > 0")
    need(cfg.users >= 0, "users", "must be >= 0")
    m = cfg.mobility
    need(0.0 <= m.alpha <= 1.0, "mobility.alpha", "must lie in [0, 1]")
    need(m.step_dt > 0, "mobility.step_dt", "must be > 0")
    need(m.mean_speed >= 0 and m.speed_sigma >= 0 and m.direction_sigma >= 0,
         "mobility", "speeds and sigmas must be >= 0")
    need(cfg.queue.service_rate > 0, "queue.service_rate", "must be > 0")
    need(cfg.queue.service_law in ("exponential", "deterministic"), "queue.service_law",
         "must be 'exponential' or 'deterministic'")
    p = cfg.power
    need(p.p_peak >= p.p_idle, "power", "p_peak must be >= p_idle")
    need(len(p.states) >= 1, "power.states", "at least one sleep state required")
    prev_power, prev_down, prev_up = p.p_idle, 0.0, 0.0
    for name, st in p.states.items():
        need(st.power <= prev_power, f"power.states.{name}.power",
             "sleep power must not increase with depth")
        need(st.down_delay >= prev_down and st.up_delay >= prev_up,
             f"power.states.{name}", "delays must not decrease with depth")
        need(min(st.down_delay, st.up_delay) >= 0, f"power.states.{name}", "delays must be >= 0")
        prev_power, prev_down, prev_up = st.power, st.down_delay, st.up_delay
    lc = cfg.lifecycle
    need(min(lc.t_start, lc.t_stop, lc.t_pause, lc.t_resume) >= 0, "lifecycle",
         "transition times must be >= 0")
    pol = cfg.policy
    need(pol.name in POLICY_NAMES, "policy.name", f"must be one of {sorted(POLICY_NAMES)}")
    need(pol.offload_margin is None or 0 <= pol.offload_margin < 1, "policy.offload_margin",
         "must lie in [0, 1)")
    need(pol.wake_margin >= 0, "policy.wake_margin", "must be >= 0")
    need(pol.tick_dt > 0, "policy.tick_dt", "must be > 0")
    need(pol.reactive_solver in ("greedy", "exact"), "policy.reactive_solver",
         "must be 'greedy' or 'exact'")
    f = cfg.forecast
    need(f.kind in ("oracle", "persistence", "ewma", "file"), "forecast.kind",
         "must be oracle, persistence, ewma or file")
    need(f.horizon >= 1, "forecast.horizon", "must be >= 1")
    need(f.step_dt > 0, "forecast.step_dt", "must be > 0")
    need(0 < f.ewma_weight <= 1, "forecast.ewma_weight", "must lie in (0, 1]")
    need(f.kind != "file" or f.path, "forecast.path", "required when forecast.kind = 'file'")
    need(cfg.sim.duration > 0, "sim.duration", "must be > 0")
    need(0 <= cfg.sim.warmup < cfg.sim.duration, "sim.warmup", "must lie in [0, duration)")
    need(math.isfinite(cfg.sim.duration), "sim.duration", "must be finite")


POLICY_NAMES = {"pnap", "pnap_p", "pnap_sa", "pnap_t", "sleepy", "reactive", "always_on"}


def dumps(cfg: ScenarioConfig) -> str:
    """Canonical JSON rendering, used for reproducibility headers."""
    return json.dumps(to_dict(cfg), sort_keys=True)


def replace(cfg: ScenarioConfig, **sections) -> ScenarioConfig:
    return dataclasses.replace(cfg, **sections)
