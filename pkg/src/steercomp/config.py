"""Scenario config files: ``key = value`` pairs under named sections.

Sections and keys::

    [plant]        sample_period wheelbase steering_ratio lookahead speed
                   initial_x initial_y initial_heading
    [actuator]     delay_steps noise_std w1 w2
    [compensator]  enabled kp ki kd w0 output_limit model
    [predictor]    features taps horizon_steps
    [scenario]     duration total_length lane_offset layout seed

Angles are radians, lengths metres, times seconds.  ``features`` and
``layout`` are comma-separated lists.  Any other section (e.g. the ``[run]``
block of a run manifest) is ignored.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import replace
from pathlib import Path

from .compensator import CompensatorGains
from .errors import ConfigurationError, ContractError
from .plant import ScenarioConfig

_FIELDS = {
    "plant": {
        "sample_period": float, "wheelbase": float, "steering_ratio": float, "lookahead": float,
        "speed": float, "initial_x": float, "initial_y": float, "initial_heading": float,
    },
    "actuator": {"delay_steps": int, "noise_std": float, "w1": float, "w2": float},
    "predictor": {"features": "list", "taps": int, "horizon_steps": int},
    "scenario": {
        "duration": float, "total_length": float, "lane_offset": float,
        "layout": "floats", "seed": int,
    },
}
_GAINS = {"kp": float, "ki": float, "kd": float, "w0": float, "output_limit": float}


def _convert(kind, text: str):
    if kind == "list":
        return tuple(v.strip() for v in text.split(",") if v.strip())
    if kind == "floats":
        return tuple(float(v) for v in text.split(",") if v.strip())
    return kind(text)


def parse_scenario(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable scenario config: {exc}") from None
    values = {}
    gains = {}
    try:
        for section, spec in _FIELDS.items():
            if not parser.has_section(section):
                continue
            for key, raw in parser.items(section):
                if key not in spec:
                    raise ConfigurationError(f"unknown key {key!r} in [{section}]")
                values[key] = _convert(spec[key], raw)
        if parser.has_section("compensator"):
            for key, raw in parser.items("compensator"):
                if key == "enabled":
                    values["compensator_enabled"] = parser.getboolean("compensator", "enabled")
                elif key == "model":
                    values["model_path"] = raw or None
                elif key in _GAINS:
                    gains[key] = float(raw)
                else:
                    raise ConfigurationError(f"unknown key {key!r} in [compensator]")
        base = base or ScenarioConfig()
        config = replace(base, **values)
        if gains:
            config = replace(config, gains=replace(config.gains, **gains))
        return replace(config, gains=replace(config.gains, sample_period=config.sample_period))
    except (ValueError, ContractError) as exc:
        raise ConfigurationError(f"invalid scenario config: {exc}") from None


def load_scenario(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    return parse_scenario(path.read_text(), base)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def scenario_sections(config: ScenarioConfig) -> dict[str, dict[str, str]]:
    out = {}
    for section, spec in _FIELDS.items():
        out[section] = {key: _fmt(getattr(config, key)) for key in spec}
    g: CompensatorGains = config.gains
    out["compensator"] = {
        "enabled": _fmt(config.compensator_enabled),
        **{key: _fmt(getattr(g, key)) for key in _GAINS},
        "model": config.model_path or "",
    }
    order = ("plant", "actuator", "compensator", "predictor", "scenario")
    return {k: out[k] for k in order}


def dump_scenario(config: ScenarioConfig, extra: dict[str, dict[str, str]] | None = None) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for section, items in {**(extra or {}), **scenario_sections(config)}.items():
        parser[section] = items
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
