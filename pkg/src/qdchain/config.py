"""Experiment configuration: YAML schema, validation and resolved defaults.

A config is a YAML mapping::

    protocol: ctap          # uniform_static | spin_static | sequential_pi | collective_pi | ctap
    n_sites: 9
    t: 1.0                  # coupling scale
    ctap: {t_max: 1.0, width: 14.0, delay: 16.8, total: 117.6}
    grid: {duration: 117.6, n_steps: 2000}
    disorder: {sigma: 0.05, n_samples: 100, seed: 0}
    output: {dir: out, trajectory: trajectory.csv, summary: summary.json,
             couplings: couplings.csv, sweep: sweep.csv}

Only ``protocol`` and ``n_sites`` are required. Unknown keys are rejected.
Times are in units of 1/t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import yaml

from .protocols import ctap_geometry

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "PROTOCOLS"]

PROTOCOLS = ("uniform_static", "spin_static", "sequential_pi", "collective_pi", "ctap")
DEFAULT_STEPS = 2000

_SCHEMA = {
    "protocol": str,
    "n_sites": int,
    "t": float,
    "ctap": {"t_max": float, "width": float, "delay": float, "total": float},
    "grid": {"duration": float, "n_steps": int},
    "disorder": {"sigma": float, "n_samples": int, "seed": int},
    "output": {"dir": str, "trajectory": str, "summary": str, "couplings": str, "sweep": str},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str
    n_sites: int
    t: float = 1.0
    t_max: float | None = None
    width: float | None = None
    delay: float | None = None
    total: float | None = None
    duration: float | None = None
    n_steps: int = DEFAULT_STEPS
    sigma: float = 0.0
    n_samples: int = 100
    seed: int = 0
    out_dir: str = "."
    trajectory: str = "trajectory.csv"
    summary: str = "summary.json"
    couplings: str = "couplings.csv"
    sweep: str = "sweep.csv"

    def __post_init__(self):
        def bad(field, msg):
            raise ConfigError(f"field '{field}': {msg}")

        if self.protocol not in PROTOCOLS:
            bad("protocol", f"must be one of {', '.join(PROTOCOLS)}; got {self.protocol!r}")
        if self.n_sites < 2:
            bad("n_sites", f"must be >= 2, got {self.n_sites}")
        if not self.t > 0:
            bad("t", f"must be positive, got {self.t}")
        if self.protocol == "ctap":
            if self.n_sites % 2 == 0:
                bad("n_sites", f"must be odd for protocol ctap, got {self.n_sites}")
            if self.width is None:
                bad("ctap.width", "required for protocol ctap")
            if self.t_max is None:
                object.__setattr__(self, "t_max", self.t)
            for name in ("t_max", "width"):
                if not getattr(self, name) > 0:
                    bad(f"ctap.{name}", f"must be positive, got {getattr(self, name)}")
            delay, total = ctap_geometry(self.width, self.delay, self.total)
            if not delay > 0:
                bad("ctap.delay", f"must be positive (odd family after even family), got {delay}")
            if not total > delay:
                bad("ctap.total", f"must exceed delay, got {total}")
            object.__setattr__(self, "delay", delay)
            object.__setattr__(self, "total", total)
        elif any(getattr(self, k) is not None for k in ("t_max", "width", "delay", "total")):
            bad("ctap", f"only valid for protocol ctap, not {self.protocol}")
        if self.duration is None:
            object.__setattr__(self, "duration", self.protocol_duration())
        if not self.duration > 0:
            bad("grid.duration", f"must be positive, got {self.duration}")
        if self.n_steps < 1:
            bad("grid.n_steps", f"must be >= 1, got {self.n_steps}")
        if not self.sigma >= 0:
            bad("disorder.sigma", f"must be >= 0, got {self.sigma}")
        if self.n_samples < 1:
            bad("disorder.n_samples", f"must be >= 1, got {self.n_samples}")
        if self.seed < 0:
            bad("disorder.seed", f"must be >= 0, got {self.seed}")

    def protocol_duration(self):
        """Natural run time of the protocol in units of 1/t."""
        t = self.t
        if self.protocol == "uniform_static":
            return 50.0 / t
        if self.protocol == "spin_static":
            return 2.0 * math.pi / t
        if self.protocol == "collective_pi":
            return math.pi / (2.0 * t)
        if self.protocol == "sequential_pi":
            return (self.n_sites - 1) * math.pi / (2.0 * t)
        return self.total

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self):
        """Nested form that :func:`parse_config` accepts unchanged."""
        d = {"protocol": self.protocol, "n_sites": self.n_sites, "t": self.t}
        if self.protocol == "ctap":
            d["ctap"] = {"t_max": self.t_max, "width": self.width,
                         "delay": self.delay, "total": self.total}
        d["grid"] = {"duration": self.duration, "n_steps": self.n_steps}
        d["disorder"] = {"sigma": self.sigma, "n_samples": self.n_samples, "seed": self.seed}
        d["output"] = {"dir": self.out_dir, "trajectory": self.trajectory,
                       "summary": self.summary, "couplings": self.couplings,
                       "sweep": self.sweep}
        return d


def _line_index(node, path=(), out=None):
    """Map key paths to 1-based source lines in a composed YAML tree."""
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (k.value,)
            out[p] = k.start_mark.line + 1
            _line_index(v, p, out)
    return out


def _coerce(value, kind, field):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field '{field}': expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"field '{field}': must be finite, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"field '{field}': expected an integer, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"field '{field}': expected a string, got {value!r}")
    return value


def _flatten(data, schema, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(f"field '{prefix.rstrip('.') or '<root>'}': expected a mapping")
    flat = {}
    for key, value in data.items():
        field = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"field '{field}': unknown key")
        kind = schema[key]
        if isinstance(kind, dict):
            for k, v in _flatten(value, kind, field + ".").items():
                flat[k] = v
        else:
            flat[field] = _coerce(value, kind, field)
    return flat


_FIELD_MAP = {
    "protocol": "protocol", "n_sites": "n_sites", "t": "t",
    "ctap.t_max": "t_max", "ctap.width": "width", "ctap.delay": "delay", "ctap.total": "total",
    "grid.duration": "duration", "grid.n_steps": "n_steps",
    "disorder.sigma": "sigma", "disorder.n_samples": "n_samples", "disorder.seed": "seed",
    "output.dir": "out_dir", "output.trajectory": "trajectory", "output.summary": "summary",
    "output.couplings": "couplings", "output.sweep": "sweep",
}


def parse_config(data):
    """Validate a nested mapping and return the resolved :class:`ExperimentConfig`."""
    flat = _flatten(data if data is not None else {}, _SCHEMA)
    for required in ("protocol", "n_sites"):
        if required not in flat:
            raise ConfigError(f"field '{required}': required")
    return ExperimentConfig(**{_FIELD_MAP[k]: v for k, v in flat.items()})


def load_config(path):
    """Read and validate a YAML config file.

    Errors carry ``path:line:`` when the offending key can be located.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: malformed YAML: {getattr(exc, 'problem', exc)}") from None
    lines = _line_index(node) if node is not None else {}
    try:
        return parse_config(data)
    except ConfigError as exc:
        msg = str(exc)
        field = msg.split("'")[1] if msg.startswith("field '") else ""
        path_key = tuple(field.split("."))
        while path_key and path_key not in lines:
            path_key = path_key[:-1]
        where = f"{path}:{lines[path_key]}" if path_key else str(path)
        raise ConfigError(f"{where}: {msg}") from None
