"""Flat ``key = value`` run configuration with dotted section keys.

Example::

    # burst.cfg
    seed = 7
    dicke.n_eff = 6
    dicke.t_max_ns = 80
    detector.efficiency = 0.1

Values from ``--set key=value`` flags override the file. Unknown keys and
out-of-range values raise :class:`ConfigError` naming the key.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .units import DEFAULT_GAMMA_RAD_S

SEED_ENV = "SUPERBURST_SEED"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(x) for x in text.split(",")) if text else ()


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], bool] | None = None
    requirement: str = ""


_pos = (lambda v: v > 0, "must be > 0")
_nonneg = (lambda v: v >= 0, "must be >= 0")
_atleast1 = (lambda v: v >= 1, "must be >= 1")
_unit = (lambda v: 0 <= v <= 1, "must be in [0, 1]")


def _k(parse, default=None, rule=None):
    check, req = rule if rule else (None, "")
    return Key(parse, default, check, req)


SCHEMA: dict[str, Key] = {
    "seed": _k(int, None, (lambda v: 0 <= v < 2**64, "must be in [0, 2**64)")),
    "threads": _k(int, 1, _atleast1),
    "gamma_rad_s": _k(float, DEFAULT_GAMMA_RAD_S, _pos),
    "io.input": _k(str),
    "io.output": _k(str),
    "dicke.n_eff": _k(int, None, _atleast1),
    "dicke.n_physical": _k(int, None, _atleast1),
    "dicke.mu": _k(float, None, _pos),
    "dicke.t_max_ns": _k(float, 100.0, _pos),
    "dicke.dt_ns": _k(float, 0.1, _pos),
    "dicke.initial": _k(_choice("inverted", "rung", "populations"), "inverted"),
    "dicke.rung": _k(int, None, _nonneg),
    "dicke.populations": _k(_floats, None, (lambda v: all(x >= 0 for x in v),
                                            "entries must be >= 0")),
    "dicke.two_time_t1_ns": _k(_floats, (), (lambda v: all(x >= 0 for x in v),
                                             "times must be >= 0")),
    "dicke.max_step": _k(float, None, _pos),
    "dicke.trace_tol": _k(float, 1e-9, _pos),
    "dicke.positivity_tol": _k(float, 1e-9, _pos),
    "obe.omega_peak": _k(float, 6.5, _nonneg),
    "obe.t_on_ns": _k(float, 1.0),
    "obe.t_off_ns": _k(float, 13.0),
    "obe.edge_ns": _k(float, 1.0, _nonneg),
    "obe.detuning": _k(float, 0.0),
    "obe.pulse_file": _k(str),
    "obe.t_max_ns": _k(float, 60.0, _pos),
    "obe.dt_ns": _k(float, 0.1, _pos),
    "obe.rho_ee0": _k(float, 0.0, _unit),
    "obe.n_atoms": _k(int, 1, _atleast1),
    "obe.max_step": _k(float, 1e-3, _pos),
    "generate.source": _k(_choice("dicke", "independent"), "dicke"),
    "generate.n_repetitions": _k(int, 30400, _atleast1),
    "generate.t_max_ns": _k(float, math.inf, _pos),
    "generate.n_atoms": _k(int, None, _nonneg),
    "generate.excitation_probability": _k(float, None, _unit),
    "generate.poisson": _k(_bool, False),
    "detector.efficiency": _k(float, 0.1, (lambda v: 0 < v <= 1, "must be in (0, 1]")),
    "detector.split_ratio": _k(float, 0.5, _unit),
    "detector.jitter_ns": _k(float, 0.0, _nonneg),
    "detector.dead_time_ns": _k(float, 0.0, _nonneg),
    "analyze.bin_ns": _k(float, 1.0, _pos),
    "analyze.t_start_ns": _k(float, 0.0),
    "analyze.t_end_ns": _k(float, 100.0),
    "analyze.integration_bins": _k(int, 2, _atleast1),
    "analyze.n_repetitions": _k(int, None, _atleast1),
    "analyze.fixed_nph": _k(int, None, _atleast1),
    "analyze.bootstrap": _k(int, 0, _nonneg),
}


class RunConfig:
    """Validated key/value mapping; missing keys fall back to schema defaults."""

    def __init__(self, values: dict[str, Any] | None = None):
        self._values = dict(values or {})

    def __getitem__(self, key: str) -> Any:
        if key not in SCHEMA:
            raise KeyError(key)
        return self._values.get(key, SCHEMA[key].default)

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def explicit(self) -> dict[str, Any]:
        return dict(self._values)

    @property
    def seed(self) -> int:
        if "seed" in self._values:
            return self._values["seed"]
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                value = parse_value("seed", env)
            except ConfigError as exc:
                raise ConfigError(f"{SEED_ENV}: {exc}") from None
            return value
        return 0


def parse_value(key: str, text: str) -> Any:
    spec = SCHEMA.get(key)
    if spec is None:
        raise ConfigError(f"unknown key {key!r}")
    try:
        value = spec.parse(text.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: invalid value {text.strip()!r} ({exc})") from None
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{key}: {value!r} {spec.requirement}")
    return value


def parse_assignments(lines, source: str = "<flags>") -> dict[str, Any]:
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, text = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        try:
            values[key.strip()] = parse_value(key.strip(), text)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (optional) and apply ``overrides`` (``key=value`` strings)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(parse_assignments(overrides, "--set"))
    return RunConfig(values)
