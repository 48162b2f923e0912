"""Versioned run configuration: one YAML file, ``key=value`` overrides and a self-describing schema.

A config holds scenario keys at the top level, ``wall`` and ``human``
sub-sections, and an optional ``zwidth`` section for sweeps.  ``preset``
names one of the tracking presets and is applied before the file's own
keys, which are applied before command-line overrides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import yaml

from ._yaml import ConfigError, dotted, load_file, load_text, where
from .experiments import PRESETS, ZWidthSpec, zwidth_template
from .sim import HumanSpec, Scenario, WallSpec

CONFIG_SCHEMA = "vdcsim-config/1"

DOCS = {
    "robot": "robot description: 'default' or a path to a robot YAML file",
    "mode": "pHRI (human only) or pHREI (human plus virtual wall)",
    "dt": "control period (s)",
    "substeps": "plant integration sub-steps per control period",
    "duration": "impedance-phase length (s); null runs one full square (4 t_f)",
    "seed": "seed for the start-pose draw, estimate perturbation and sensor noise",
    "q_start": "calibration target joint angles (rad)",
    "initial_spread": "half-width of the uniform start-pose draw around q_start (rad)",
    "calib_gain": "joint-space regulator gain during calibration (1/s)",
    "calib_tol": "calibration ends once every joint is within this distance of q_start (rad)",
    "calib_max_time": "calibration time limit (s)",
    "side": "square side length (m)",
    "t_f": "time per square side (s)",
    "B_d": "target impedance damping diagonal",
    "K_d": "target impedance stiffness diagonal",
    "f_d": "desired force the robot exerts (world frame)",
    "K_D": "body velocity-error feedback gain",
    "K_I": "body integral gain",
    "k_d": "joint velocity-error feedback gain",
    "k_I": "joint integral gain",
    "gamma": "adaptation gain",
    "adapt": "run parameter adaptation",
    "windup": "integral clamp",
    "qdd_filter": "low-pass cut-off on the differentiated required joint velocity (Hz, 0 = off)",
    "param_error": "initial estimates scale each true parameter by 1 + U(-e, e)",
    "sensor_noise": "standard deviation of white noise added to the measured wrench (N, N m)",
    "diagnostics": "evaluate the accompanying function and power-flow identities every tick",
    "stop_on_nonpassive": "abort the run as soon as the contact energy drops below -eps",
    "wall.enabled": "render the wall in pHREI mode",
    "wall.k_e": "wall stiffness (N/m)",
    "wall.element": "dissipative element: none, mass or damping",
    "wall.m_d": "varying virtual mass (kg)",
    "wall.b_e": "virtual damping (N s/m)",
    "wall.offset": "wall plane height relative to the start corner (m)",
    "wall.accel_filter": "low-pass cut-off for the contact acceleration (Hz)",
    "wall.energy_rule": "contact energy quadrature: rectangle, trapezoid or zoh",
    "wall.eps": "passivity slack on the running minimum of the contact energy (J)",
    "human.enabled": "couple the hand model to the handle",
    "human.M_h": "hand inertia diagonal",
    "human.B_h": "hand damping diagonal",
    "human.K_h": "hand-to-handle coupling stiffness diagonal",
    "zwidth.damping_grid": "virtual damping values to sweep (N s/m)",
    "zwidth.mass_grid": "virtual mass values to sweep (kg)",
    "zwidth.k_max": "upper end of the stiffness bisection (N/m)",
    "zwidth.resolution": "stiffness bisection resolution (N/m)",
}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    zwidth: ZWidthSpec
    source: str = "<defaults>"


def _coerce(value, default, loc, free_len=False):
    """Convert ``value`` to the type of ``default``; ``loc`` prefixes errors."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{loc}: expected true or false, got {value!r}")
        return value
    if isinstance(default, (int, float)) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{loc}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{loc}: must be finite")
        return int(value) if isinstance(default, int) and value == int(value) else float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{loc}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"{loc}: expected a list of numbers, got {value!r}")
        if not free_len and len(value) != len(default):
            raise ConfigError(f"{loc}: expected {len(default)} numbers, got {len(value)}")
        return tuple(float(v) for v in value)
    raise ConfigError(f"{loc}: unsupported value {value!r}")


def _defaults(cls, instance=None):
    inst = cls() if instance is None else instance
    return {f.name: getattr(inst, f.name) for f in fields(cls)}


def _section_names():
    return {
        "": [f.name for f in fields(Scenario) if f.name not in ("wall", "human")],
        "wall": [f.name for f in fields(WallSpec)],
        "human": [f.name for f in fields(HumanSpec)],
        "zwidth": ["damping_grid", "mass_grid", "k_max", "resolution"],
    }


def _apply(changes: dict, data: dict, locate) -> None:
    """Validate ``data`` (one config document) into ``changes`` in place."""
    names = _section_names()
    scn_defaults = _defaults(Scenario)
    for key, value in data.items():
        if key == "schema":
            if value != CONFIG_SCHEMA:
                raise ConfigError(f"{locate((key,))}: unsupported schema {value!r}; expected {CONFIG_SCHEMA}")
            continue
        if key == "preset":
            continue
        if key in ("wall", "human", "zwidth"):
            if not isinstance(value, dict):
                raise ConfigError(f"{locate((key,))}: {key} must be a mapping")
            sect_defaults = {
                "wall": _defaults(WallSpec), "human": _defaults(HumanSpec),
                "zwidth": {"damping_grid": (0.0,), "mass_grid": (0.0,), "k_max": 1.0, "resolution": 1.0},
            }[key]
            target = changes.setdefault(key, {})
            for sub, v in value.items():
                if sub not in names[key]:
                    raise ConfigError(f"{locate((key, sub))}: unknown key {dotted((key, sub))!r}")
                target[sub] = _coerce(v, sect_defaults[sub], f"{locate((key, sub))}: {key}.{sub}",
                                      free_len=key == "zwidth")
            continue
        if key not in names[""]:
            raise ConfigError(f"{locate((key,))}: unknown key {key!r}")
        changes[key] = _coerce(value, scn_defaults[key], f"{locate((key,))}: {key}")


def parse_override(text: str) -> dict:
    """``"wall.k_e=1500"`` -> ``{"wall": {"k_e": 1500}}`` (values parsed as YAML)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r}: empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError:
        raise ConfigError(f"override {text!r}: cannot parse value") from None
    out = value
    for part in reversed(key.split(".")):
        out = {part: out}
    return out


def _build(changes: dict, source: str) -> RunConfig:
    wall = changes.pop("wall", {})
    human = changes.pop("human", {})
    zw = changes.pop("zwidth", {})
    try:
        scenario = Scenario().with_changes(wall=wall, human=human, **changes)
        if scenario.wall.element not in ("none", "mass", "damping"):
            raise ValueError("wall.element must be none, mass or damping")
        if scenario.wall.energy_rule not in ("rectangle", "trapezoid", "zoh"):
            raise ValueError("wall.energy_rule must be rectangle, trapezoid or zoh")
        spec = ZWidthSpec(**zw, template=zwidth_template().with_changes(
            human=scenario.human, B_d=scenario.B_d, K_d=scenario.K_d, robot=scenario.robot,
            duration=scenario.duration,
            wall={"offset": scenario.wall.offset, "energy_rule": scenario.wall.energy_rule,
                  "eps": scenario.wall.eps, "accel_filter": scenario.wall.accel_filter}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(scenario, spec, source)


def _merge(dst: dict, src: dict) -> dict:
    for k, v in src.items():
        if isinstance(v, dict) and isinstance(dst.get(k), dict):
            _merge(dst[k], v)
        else:
            dst[k] = v
    return dst


def load_config(path=None, overrides=(), preset: str | None = None, text: str | None = None) -> RunConfig:
    """Defaults, then preset, then the file, then overrides; every key is validated."""
    changes: dict = {}
    source = "<defaults>"
    data, lines = {}, {}
    if text is not None:
        source = "<string>"
        data, lines = load_text(text, source)
    elif path is not None:
        source = str(path)
        data, lines = load_file(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: a config must be a mapping")
    preset = data.get("preset", preset) if preset is None else preset
    if preset is not None:
        if preset not in PRESETS:
            loc = where(source, lines, ("preset",)) if "preset" in data else "preset"
            raise ConfigError(f"{loc}: unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        _apply(changes, PRESETS[preset], lambda p: f"preset {preset}")
    _apply(changes, data, lambda p: where(source, lines, p))
    for text_ov in overrides:
        _apply(changes, parse_override(text_ov), lambda p, t=text_ov: f"override {t!r}")
    return _build(changes, source)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return yaml.safe_dump(value, default_flow_style=True).strip().removesuffix("...").strip()


def describe() -> str:
    """The full schema as a commented YAML document holding every default."""
    out = [f"schema: {CONFIG_SCHEMA}", "# preset: slow   # one of: " + ", ".join(PRESETS)]
    scn = Scenario()
    for name in _section_names()[""]:
        out.append(f"{name}: {_fmt(getattr(scn, name))}  # {DOCS[name]}")
    for sect, inst in (("wall", scn.wall), ("human", scn.human)):
        out.append(f"{sect}:")
        for name in _section_names()[sect]:
            out.append(f"  {name}: {_fmt(getattr(inst, name))}  # {DOCS[f'{sect}.{name}']}")
    spec = ZWidthSpec()
    out.append("zwidth:")
    for name in _section_names()["zwidth"]:
        out.append(f"  {name}: {_fmt(getattr(spec, name))}  # {DOCS[f'zwidth.{name}']}")
    return "\n".join(out) + "\n"
