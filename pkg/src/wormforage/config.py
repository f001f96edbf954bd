"""TOML configuration for runs and sweeps.

One file gathers every tunable constant across the simulation, environment,
optimizer, and pipeline layers, and `settings_to_toml` re-emits all of them,
so a sweep directory is self-describing: the config written next to the
results is sufficient to reproduce them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib  # type: ignore[no-redef]

from wormforage.environment import EnvConfig, MotorParams
from wormforage.evolution import EvoConfig
from wormforage.mads import MadsConfig
from wormforage.neural_sim import SimParams
from wormforage.pipelines import EsConfig, PipelineTuning


class ConfigError(ValueError):
    """A config file or config value is invalid (CLI exit code 1)."""


@dataclass(frozen=True)
class Settings:
    env: EnvConfig = EnvConfig()
    sim: SimParams = SimParams()
    motor: MotorParams = MotorParams()
    evo: EvoConfig = EvoConfig()
    mads: MadsConfig = MadsConfig()
    es: EsConfig = EsConfig()
    tuning: PipelineTuning = PipelineTuning()


_SECTIONS: dict[str, type] = {
    "env": EnvConfig,
    "sim": SimParams,
    "motor": MotorParams,
    "evo": EvoConfig,
    "mads": MadsConfig,
    "es": EsConfig,
    "tuning": PipelineTuning,
}

# Optional fields where an absent TOML key means None, with a hint for the
# emitted config file (TOML cannot express null).
_OPTIONAL_HINTS = {
    ("mads", "max_evaluations"): "unset: 50 evaluations per subset coordinate",
    ("mads", "lower_bound"): "unset: unbounded",
    ("mads", "upper_bound"): "unset: unbounded",
    ("env", "custom_food"): 'array of [x, y] pairs, used when layout = "custom"',
}


def default_settings() -> Settings:
    return Settings()


def _coerce(section: str, key: str, value: Any, target: Any) -> Any:
    """Check a TOML value against the dataclass field's declared type."""
    origin = str(target)
    if key == "custom_food":
        try:
            return tuple((float(x), float(y)) for x, y in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key}: expected [[x, y], ...] pairs") from exc
    if target is float or "float" in origin:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}")
        return float(value)
    if target is int or "int" in origin:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}")
        return int(value)
    if target is str or "str" in origin:
        if not isinstance(value, str):
            raise ConfigError(f"[{section}] {key}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"[{section}] {key}: unsupported value {value!r}")


def _build_section(section: str, cls: type, overrides: dict[str, Any]) -> Any:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in overrides.items():
        if key not in fields:
            known = ", ".join(sorted(fields))
            raise ConfigError(f"[{section}] unknown key {key!r} (known: {known})")
        kwargs[key] = _coerce(section, key, value, fields[key].type)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def settings_from_dict(data: dict[str, Any]) -> Settings:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(
            f"unknown config section(s) {sorted(unknown)} (known: {sorted(_SECTIONS)})"
        )
    built = {}
    for section, cls in _SECTIONS.items():
        overrides = data.get(section, {})
        if not isinstance(overrides, dict):
            raise ConfigError(f"[{section}] must be a table")
        built[section] = _build_section(section, cls, overrides)
    return Settings(**built)


def load_settings(path: str | Path | None) -> Settings:
    """Read a TOML config; None or a missing [section] falls back to defaults."""
    if path is None:
        return default_settings()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return settings_from_dict(data)


def _toml_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, tuple):
        inner = ", ".join(f"[{x!r}, {y!r}]" for x, y in value)
        return f"[{inner}]"
    raise TypeError(f"cannot serialize {value!r} to TOML")


def settings_to_toml(settings: Settings) -> str:
    """Emit every knob with its active value; None fields appear as comments."""
    lines = ["# Full run configuration; every tunable value is listed."]
    for section, cls in _SECTIONS.items():
        lines.append("")
        lines.append(f"[{section}]")
        value_obj = getattr(settings, section)
        for f in dataclasses.fields(cls):
            value = getattr(value_obj, f.name)
            if value is None:
                hint = _OPTIONAL_HINTS.get((section, f.name), "unset")
                lines.append(f"# {f.name} = ({hint})")
            else:
                lines.append(f"{f.name} = {_toml_scalar(value)}")
    return "\n".join(lines) + "\n"


def write_config(settings: Settings, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(settings_to_toml(settings))
