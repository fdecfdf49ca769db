"""Run configuration and its INI serialization.

A config file has the sections ``[run]``, ``[grid]``, ``[initial]``,
``[scheme]`` and ``[norms]``.  Floats are written with ``repr`` so that
``parse(serialize(cfg)) == cfg`` holds exactly.  Lists are comma separated;
pairs inside a list use ``:`` (``sp_pairs = 0:2, 2:1``).
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .field import Grid, SpectralField, random_field
from .output import read_checkpoint
from .stepping import NormRequest, SchemeConfig

__all__ = [
    "InitialData",
    "RunConfig",
    "PRESETS",
    "preset_config",
    "parse_config",
    "serialize_config",
    "load_config",
    "apply_overrides",
    "build_initial",
]

INITIAL_KINDS = ("sine", "coefficients", "random", "checkpoint")
MONITORS = ("lyapunov", "fsp", "radius", "decay")

# list-valued fields and how their items are encoded
_LISTS = {
    "s_values": "float",
    "besov_s": "float",
    "sp_pairs": "tuple",
    "analytic": "tuple",
    "coefficients": "tuple",
    "monitors": "str",
}


@dataclass
class InitialData:
    """``sine``: amplitude * sin(mode * x).  ``coefficients``: entries
    (k, re, im) in 1D or (kx, ky, re, im) in 2D, conjugates filled in.
    ``random``: seeded coefficients on 0 < |k| <= band scaled to ``norm2``.
    ``checkpoint``: restart from ``path``.
    """

    kind: str = "sine"
    amplitude: float = 0.1
    mode: int = 1
    coefficients: tuple = ()
    seed: int = 0
    band: int = 8
    norm2: float = 0.1
    path: str = ""

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"initial kind must be one of {INITIAL_KINDS}")
        self.coefficients = tuple(tuple(float(v) for v in c) for c in self.coefficients)
        if self.kind == "checkpoint" and not self.path:
            raise ValueError("checkpoint initial data needs a path")


@dataclass
class RunConfig:
    name: str = "run"
    t_end: float = 10.0
    n_snapshots: int = 12
    snapshot_t_min: float = 0.01
    monitors: tuple = MONITORS
    stream: bool = True
    workers: int = 1
    grid: Grid = field(default_factory=Grid)
    initial: InitialData = field(default_factory=InitialData)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    norms: NormRequest = field(default_factory=NormRequest)

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.n_snapshots < 0:
            raise ValueError("n_snapshots must be nonnegative")
        if not 0 < self.snapshot_t_min <= self.t_end:
            raise ValueError("need 0 < snapshot_t_min <= t_end")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.monitors = tuple(self.monitors)
        bad = set(self.monitors) - set(MONITORS)
        if bad:
            raise ValueError(f"unknown monitors {sorted(bad)}; choose from {MONITORS}")
        for _, p in self.norms.sp_pairs:
            if not 1.0 <= p <= 2.0:
                raise ValueError("norm p values must lie in [1, 2]")
        for _, nu in self.norms.analytic:
            if nu < 0:
                raise ValueError("analytic nu values must be nonnegative")
        if self.scheme.scheme == "fd_backward_euler" and self.grid.dim != 1:
            raise ValueError("finite-difference scheme is 1D only")

    def snapshot_times(self, t0=0.0):
        """Geometric output times between t0 + snapshot_t_min and t_end."""
        if self.n_snapshots == 0:
            return []
        lo = t0 + self.snapshot_t_min
        if self.n_snapshots == 1 or lo >= self.t_end:
            return [self.t_end]
        return [float(v) for v in np.geomspace(lo, self.t_end, self.n_snapshots)]


PRESETS = {
    "fig1": {"amplitude": 0.1, "scheme": "spectral_imex", "t_end": 10.0},
    "fig2": {"amplitude": 0.3, "scheme": "spectral_imex", "t_end": 10.0},
    "fig3": {"amplitude": 3.0, "scheme": "fd_backward_euler", "t_end": 1.0},
}


def preset_config(name, n=256):
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    return RunConfig(
        name=name,
        t_end=p["t_end"],
        grid=Grid(1, n),
        initial=InitialData("sine", amplitude=p["amplitude"]),
        scheme=SchemeConfig(scheme=p["scheme"]),
    )


# --- serialization ---------------------------------------------------------

_SECTIONS = (("grid", Grid), ("initial", InitialData), ("scheme", SchemeConfig), ("norms", NormRequest))


def _encode(name, value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        kind = _LISTS[name]
        if kind == "str":
            return ", ".join(value)
        if kind == "float":
            return ", ".join(repr(float(v)) for v in value)
        return ", ".join(":".join(repr(float(v)) for v in item) for item in value)
    return str(value)


def _decode(name, text, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        v = float(text)
        if math.isnan(v):
            raise ValueError(f"{name}: NaN is not allowed")
        return v
    if isinstance(default, tuple):
        items = [t.strip() for t in text.split(",") if t.strip()]
        kind = _LISTS[name]
        if kind == "str":
            return tuple(items)
        if kind == "float":
            return tuple(float(t) for t in items)
        return tuple(tuple(float(v) for v in t.split(":")) for t in items)
    return text


def serialize_config(cfg):
    cp = configparser.ConfigParser(interpolation=None)
    cp["run"] = {
        f.name: _encode(f.name, getattr(cfg, f.name))
        for f in dataclasses.fields(cfg)
        if f.name not in dict(_SECTIONS)
    }
    for section, _ in _SECTIONS:
        obj = getattr(cfg, section)
        cp[section] = {f.name: _encode(f.name, getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in cp[section].items())
        lines.append("")
    return "\n".join(lines)


def _build(cls, values, section):
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"[{section}]: unknown keys {sorted(unknown)}")
    kwargs = {k: _decode(k, v, getattr(defaults, k)) for k, v in values.items()}
    return cls(**kwargs)


def _from_sections(sections):
    extra = set(sections) - {"run", *dict(_SECTIONS)}
    if extra:
        raise ValueError(f"unknown sections {sorted(extra)}")
    parts = {name: _build(cls, sections.get(name, {}), name) for name, cls in _SECTIONS}
    run_defaults = RunConfig()
    run = sections.get("run", {})
    known = {f.name for f in dataclasses.fields(RunConfig)} - set(parts)
    unknown = set(run) - known
    if unknown:
        raise ValueError(f"[run]: unknown keys {sorted(unknown)}")
    kwargs = {k: _decode(k, v, getattr(run_defaults, k)) for k, v in run.items()}
    return RunConfig(**kwargs, **parts)


def _sections(text):
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    return {s: dict(cp[s]) for s in cp.sections()}


def parse_config(text):
    return _from_sections(_sections(text))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def apply_overrides(cfg, overrides):
    """Return a new config with ``section.key=value`` strings applied."""
    sections = _sections(serialize_config(cfg))
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ValueError(f"override {item!r} is not of the form section.key=value")
        sections.setdefault(section, {})[name] = value
    return _from_sections(sections)


# --- initial data ----------------------------------------------------------


def build_initial(cfg):
    """Initial field and start time for ``cfg``."""
    init, grid = cfg.initial, cfg.grid
    if init.kind == "checkpoint":
        f, t0, _, _ = read_checkpoint(init.path)
        if f.grid != grid:
            raise ValueError(f"checkpoint grid {f.grid} does not match config grid {grid}")
        return f, float(t0)
    if init.kind == "sine":
        return SpectralField.from_function(grid, lambda x, *_: init.amplitude * np.sin(init.mode * x)), 0.0
    if init.kind == "random":
        return random_field(grid, np.random.default_rng(init.seed), init.band, init.norm2), 0.0
    coeffs = np.zeros(grid.shape, dtype=complex)
    for entry in init.coefficients:
        if len(entry) != grid.dim + 2:
            raise ValueError(f"coefficient entry {entry} needs {grid.dim} wavenumbers plus re, im")
        k = tuple(int(v) for v in entry[: grid.dim])
        if any(abs(v) >= grid.n // 2 for v in k):
            raise ValueError(f"wavenumber {k} not representable on n={grid.n}")
        c = complex(entry[-2], entry[-1])
        if not any(k):
            coeffs[k] += c.real
            continue
        coeffs[k] += c
        coeffs[tuple(-v for v in k)] += np.conj(c)
    return SpectralField(grid, spectral=coeffs), 0.0
