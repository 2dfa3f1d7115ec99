"""Declarative configuration: one YAML file drives every knob.

Each section maps onto the owning module's config dataclass; unknown keys are
rejected with the full field path so typos fail loudly instead of silently
running defaults. Credentials are never read from this file, only from the
environment variables named by provider specs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .backtest import BacktestConfig
from .consensus import ConsensusParams
from .metrics import MetricsConfig, PreferenceRegion
from .providers import ProviderSpec
from .signals import SignalConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    storage_dir: str = "session-store"
    cors_origin: str = "*"


@dataclass(frozen=True)
class ReflectionSettings:
    slope_window: int = 5
    sharpe_window_mode: str = "eval"  # or "trade": trail the trade date instead


DEFAULT_ROSTER = (
    ProviderSpec(provider_id="analyst-a", endpoint="mock://analyst"),
    ProviderSpec(provider_id="analyst-b", endpoint="mock://analyst"),
    ProviderSpec(provider_id="analyst-c", endpoint="mock://analyst"),
)


@dataclass(frozen=True)
class AppConfig:
    seed: int = 7
    output_dir: str = "out"
    cutoff_hour: int = 13  # decision cutoff, local clock time on the trade day
    max_lookback: int = 400
    roster: tuple[ProviderSpec, ...] = DEFAULT_ROSTER
    consensus: ConsensusParams = field(default_factory=ConsensusParams)
    signals: SignalConfig = field(default_factory=SignalConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    reflection: ReflectionSettings = field(default_factory=ReflectionSettings)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    preference_region: PreferenceRegion | None = None


_TUPLE_FIELDS = {"view_horizons", "horizons"}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown field for {cls.__name__}")
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path | None) -> AppConfig:
    """Load an AppConfig from a YAML file; None loads pure defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = yaml.safe_load(path.read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    kwargs: dict = {}
    sections = {
        "consensus": ConsensusParams,
        "signals": SignalConfig,
        "backtest": BacktestConfig,
        "metrics": MetricsConfig,
        "reflection": ReflectionSettings,
        "service": ServiceConfig,
        "preference_region": PreferenceRegion,
    }
    for key, value in raw.items():
        if key in ("seed", "output_dir", "cutoff_hour", "max_lookback"):
            kwargs[key] = value
        elif key == "roster":
            if not isinstance(value, list):
                raise ConfigError("roster: expected a list of provider specs")
            kwargs["roster"] = tuple(
                _build(ProviderSpec, spec, f"roster[{i}]") for i, spec in enumerate(value)
            )
        elif key in sections:
            kwargs[key] = _build(sections[key], value, key)
        else:
            raise ConfigError(f"{key}: unknown top-level config section")
    return AppConfig(**kwargs)
