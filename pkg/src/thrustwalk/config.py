"""Flat ``key = value`` run configuration files.

One assignment per line, ``#`` starts a comment.  Top-level keys set
:class:`~thrustwalk.sim.SimConfig` fields; dotted keys address a section::

    duration = 10
    mpc.horizon = 10
    mpc.q = 300000, 2000      # diagonal of Q
    ground.k_gp = 8000
    ground.slope_deg = 30
    gait.step_length = 0.15
    pid.k_p = 80, 80, 400

Unknown keys are errors.  Missing keys keep their defaults.
"""

from __future__ import annotations

import ast
import dataclasses
import math
from pathlib import Path

import numpy as np

from .gait import GaitSchedule, PidGains
from .model import GroundParams, MassProperties, RobotParams
from .mpc import MpcConfig
from .sim import SimConfig
from .spatial import LegGeometry


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


# section -> (dataclass, aliases mapping lower-case key to field name)
SECTIONS = {
    "": (SimConfig, {}),
    "mpc": (MpcConfig, {"horizon": "N", "n": "N", "q": "Q", "r": "R"}),
    "gait": (GaitSchedule, {}),
    "pid": (PidGains, {"k_p": "K_p", "k_i": "K_i", "k_d": "K_d", "kp": "K_p", "ki": "K_i", "kd": "K_d"}),
    "ground": (GroundParams, {"slope_deg": "slope_deg"}),
    "mass": (MassProperties, {"m_b": "m_B", "m_h": "m_H", "m_k": "m_K", "i_b": "I_B", "i_h": "I_H", "i_k": "I_K"}),
    "leg": (LegGeometry, {}),
}
# fields that are structure, not values
_NESTED = {"params", "mpc", "gait", "pid", "initial_state"}
_SKIP = {"gait": {"phase", "step_start", "steps"}, "leg": {"side"}}


def _fields(section: str) -> dict[str, str]:
    cls, aliases = SECTIONS[section]
    names = {f.name for f in dataclasses.fields(cls)} - _NESTED - _SKIP.get(section, set())
    table = {n.lower(): n for n in names}
    table.update(aliases)
    return table


def _parse_scalar(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _convert(raw: str, default, key: str):
    """Coerce the text ``raw`` to the type of ``default``."""
    text = raw.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"{key} expects a boolean, got {text!r}")
    if isinstance(default, int):
        val = _parse_scalar(text)
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValueError(f"{key} expects an integer, got {text!r}")
        return val
    if isinstance(default, float) or default is None:
        val = _parse_scalar(text)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValueError(f"{key} expects a number, got {text!r}")
        return float(val)
    if isinstance(default, str):
        val = _parse_scalar(text)
        return val if isinstance(val, str) else text
    if isinstance(default, tuple):
        items = [t.strip().strip("'\"") for t in text.strip("()[]").split(",") if t.strip()]
        return tuple(items)
    if isinstance(default, np.ndarray):
        val = _parse_scalar(text if text.startswith("[") else f"[{text}]")
        try:
            arr = np.asarray(val, dtype=float)
        except (TypeError, ValueError):
            raise ValueError(f"{key} expects numbers, got {text!r}") from None
        return arr
    raise ValueError(f"{key} cannot be set from a config file")


def _weight(value: np.ndarray, key: str) -> np.ndarray:
    """A 2x2 weight from its diagonal (2 values) or all entries (4 values)."""
    flat = np.ravel(value)
    if flat.size == 2:
        return np.diag(flat)
    if flat.size == 4:
        return flat.reshape(2, 2)
    raise ValueError(f"{key} expects 2 (diagonal) or 4 values")


def parse_text(text: str, source: str = "<config>") -> dict[str, dict[str, object]]:
    """Parse to ``{section: {field: value}}`` with types checked against defaults."""
    defaults = {
        "": SimConfig(),
        "mpc": MpcConfig(),
        "gait": GaitSchedule(),
        "pid": SimConfig().pid,
        "ground": GroundParams(),
        "mass": MassProperties(),
        "leg": LegGeometry(),
    }
    out: dict[str, dict[str, object]] = {name: {} for name in SECTIONS}
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno, source)
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {body!r}", lineno, source)
        section, _, name = key.rpartition(".")
        section = section.lower()
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r} in key {key!r}", lineno, source)
        table = _fields(section)
        field_name = table.get(name.lower())
        if field_name is None:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key.lower() in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key.lower()]})", lineno, source)
        seen[key.lower()] = lineno
        if field_name == "slope_deg":
            default = 30.0
        else:
            default = getattr(defaults[section], field_name)
        try:
            val = _convert(value, default, key)
            if field_name in ("Q", "R"):
                val = _weight(val, key)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, source) from None
        out[section][field_name] = val
    return out


def build_config(sections: dict[str, dict[str, object]], source: str = "<config>") -> SimConfig:
    """Assemble a validated :class:`SimConfig` from parsed sections."""
    try:
        ground = dict(sections.get("ground", {}))
        if "slope_deg" in ground:
            if "slope_alpha" in ground:
                raise ValueError("set either ground.slope_alpha or ground.slope_deg, not both")
            ground["slope_alpha"] = math.radians(ground.pop("slope_deg"))
        params = RobotParams(
            left=LegGeometry(**sections.get("leg", {})),
            mass=MassProperties(**sections.get("mass", {})),
            ground=GroundParams(**ground),
        )
        top = dict(sections.get("", {}))
        mpc_kw = dict(sections.get("mpc", {}))
        mpc_kw.setdefault("dt", top.get("dt_ctrl", SimConfig.__dataclass_fields__["dt_ctrl"].default))
        return SimConfig(
            params=params,
            mpc=MpcConfig(**mpc_kw),
            gait=GaitSchedule(**sections.get("gait", {})),
            pid=dataclasses.replace(SimConfig().pid, **sections.get("pid", {})),
            **top,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), None, source) from None


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> SimConfig:
    """Read ``path`` (defaults when None) and apply ``key=value`` overrides on top."""
    text = ""
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", None, source) from None
    if overrides:
        text += "\n" + "\n".join(f"{k} = {v}" for k, v in overrides.items())
    return build_config(parse_text(text, source), source)
