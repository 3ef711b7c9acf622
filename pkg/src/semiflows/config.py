"""Flat ``key = value`` run configuration."""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields

COMMANDS = ("simulate", "equilibria", "graph", "chain", "omega", "connections",
            "demo-duffing", "demo-chafee")
SYSTEMS = ("duffing", "contraction", "chafee")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class RunConfig:
    command: str
    # system
    system: str = "chafee"
    map: str = "cubic:lambda=15.0"
    form: str = "ci"
    n_interior: int = 200
    length: float = 1.0
    # numerics
    dt: float = 1e-3
    T: float = 50.0
    tol: float = 1e-3
    residual_tol: float = 1e-4
    policy: str = "midpoint"
    n_runs: int = 50
    record_every: int = 100
    duffing_start: tuple[float, ...] = (0.5, 0.0)
    # graph
    bounds: tuple[float, ...] = (-1.8, 1.8, -1.8, 1.8)
    resolution: tuple[int, ...] = (60, 60)
    t_flow: float = 0.5
    epsilon: float | None = None
    n_samples: int = 8
    n_selections: int = 1
    chain_from: tuple[float, ...] = (1.2, 0.0)
    chain_to: tuple[float, ...] = (1.2, 0.0)
    # probes
    n_probes: int = 200
    probe_radius: float = 0.05
    probe_T: float = 30.0
    probe_dt: float = 1e-2
    # bookkeeping
    seed: int = 0
    output_dir: str = "runs/out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_POSITIVE = {"dt", "T", "tol", "residual_tol", "length", "t_flow", "probe_radius", "probe_T",
             "probe_dt", "n_interior", "n_runs", "record_every", "n_samples", "n_selections",
             "n_probes"}

_HINTS = typing.get_type_hints(RunConfig)


def _parse_value(name: str, text: str):
    hint = _HINTS[name]
    text = text.strip()
    if hint is str:
        return text
    if hint is int:
        return int(text)
    if hint is float:
        return float(text)
    if hint == (float | None):
        return None if text.lower() in ("auto", "none", "") else float(text)
    if hint == tuple[float, ...]:
        return tuple(float(v) for v in text.split(","))
    if hint == tuple[int, ...]:
        return tuple(int(v) for v in text.split(","))
    raise TypeError(f"unsupported field type for {name}")


def _render_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ",".join(_render_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _validate(cfg: dict, lines: dict[str, int]) -> list[str]:
    errs = []

    def err(key, msg):
        where = f"line {lines[key]}: " if key in lines else ""
        errs.append(where + msg)

    if cfg.get("command") not in COMMANDS:
        err("command", f"unknown command {cfg.get('command')!r}")
    for k in _POSITIVE:
        if k in cfg and not cfg[k] > 0:
            err(k, f"{k} must be positive")
    if cfg.get("epsilon") is not None and cfg["epsilon"] < 0:
        err("epsilon", "epsilon must be nonnegative")
    if "system" in cfg and cfg["system"] not in SYSTEMS:
        err("system", f"system must be one of {', '.join(SYSTEMS)}")
    if "form" in cfg and cfg["form"] not in ("ci", "rd"):
        err("form", "form must be ci or rd")
    if "bounds" in cfg or "resolution" in cfg:
        b = cfg.get("bounds", RunConfig.bounds)
        r = cfg.get("resolution", RunConfig.resolution)
        if len(b) != 2 * len(r):
            err("bounds", "bounds needs a min,max pair per resolution entry")
        elif any(b[2 * i] >= b[2 * i + 1] for i in range(len(r))):
            err("bounds", "each axis needs min < max")
        if len(r) > 3:
            err("resolution", "graphs are limited to 3 dimensions")
        if any(x < 1 for x in r):
            err("resolution", "resolution entries must be positive")
    if "seed" in cfg and not 0 <= cfg["seed"] < 2 ** 64:
        err("seed", "seed must be a 64-bit unsigned integer")
    return errs


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse the flat format; collects every error before raising ``ConfigError``."""
    names = {f.name for f in fields(RunConfig)}
    values: dict = {}
    lines: dict[str, int] = {}
    errs = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            errs.append(f"line {no}: expected key = value")
            continue
        if key not in names:
            errs.append(f"line {no}: unknown key {key!r}")
            continue
        if key in values:
            errs.append(f"line {no}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, val)
            lines[key] = no
        except ValueError:
            errs.append(f"line {no}: cannot parse {key} = {val.strip()!r}")
    for k, v in (overrides or {}).items():
        values[k] = v
    if "command" not in values:
        errs.append("missing key 'command'")
    errs += _validate(values, lines)
    if errs:
        raise ConfigError(errs)
    return RunConfig(**values)


def render_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_render_value(getattr(cfg, f.name))}\n" for f in fields(cfg))
