"""Run configuration: flat key-value sections in an INI-style text file."""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .constants import HYDROGEN_MASS_AMU
from .groundstate import VQEOptions
from .pipeline import METHOD_TAGS, ORACLE, MethodOptions, SystemOptions
from .properties import FD_STEP

OUT_DIR_ENV = "QSEDYN_OUT"
DEFAULT_GRID = "0.35:0.55:0.05, 0.56:0.74:0.01, 0.75:1.50:0.05"


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """Comma-separated values or inclusive ``start:stop:step`` segments, sorted and unique."""
    points = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                start, stop, step = (float(x) for x in part.split(":"))
                if step <= 0 or stop < start:
                    raise ConfigError(f"bad grid segment {part!r}")
                n = int(round((stop - start) / step))
                points.extend(start + step * np.arange(n + 1))
            else:
                points.append(float(part))
        except ValueError as exc:
            raise ConfigError(f"unreadable grid entry {part!r}") from exc
    grid = np.unique(np.round(points, 10))
    if grid.size < 2:
        raise ConfigError("grid needs at least two points")
    if grid[0] <= 0.1:
        raise ConfigError("grid distances must exceed 0.1 A")
    return grid


@dataclass
class GeometryConfig:
    bond_length: float = 0.735
    angle_deg: float = 88.0
    grid: str = DEFAULT_GRID
    window: float = 0.15

    def system(self) -> SystemOptions:
        return SystemOptions(bond_length=self.bond_length, angle_deg=self.angle_deg)

    def grid_values(self) -> np.ndarray:
        return parse_grid(self.grid)


@dataclass
class MethodConfig:
    methods: str = ",".join(METHOD_TAGS)
    pool: str = "singles,doubles"
    tda_identity: bool = False
    extended_identity: bool = True
    svd_threshold: float = 1e-7
    qeom_energies: str = "unpenalized"
    fd_step: float = FD_STEP
    n_states: int = 3
    degeneracy_floor: float = 1e-8

    def tags(self) -> list[str]:
        return [t.strip() for t in self.methods.split(",") if t.strip()]

    def options(self) -> MethodOptions:
        return MethodOptions(
            pool_ranks=tuple(p.strip() for p in self.pool.split(",") if p.strip()),
            tda_identity=self.tda_identity,
            extended_identity=self.extended_identity,
            svd_threshold=self.svd_threshold,
            qeom_energies=self.qeom_energies,
            fd_step=self.fd_step,
            n_states=self.n_states,
            degeneracy_floor=self.degeneracy_floor,
        )


@dataclass
class VQEConfig:
    grad_tol: float = 1e-4
    opt_tol: float = 1e-8
    max_layers: int = 30
    max_iter: int = 2000
    seed: int = 0

    def options(self) -> VQEOptions:
        return VQEOptions(self.grad_tol, self.opt_tol, self.max_layers, self.max_iter)


@dataclass
class DynamicsConfig:
    methods: str = "oracle,qse_tda,qeom_extended"
    n_traj: int = 500
    dt: float = 0.1
    t_max: float = 800.0
    seed: int = 7
    r0: float = 0.50
    omega: float = 0.05
    velocity: float = 0.0
    temperature: float = 0.0
    mass: float = HYDROGEN_MASS_AMU
    initial_state: int = 0
    frustrated: str = "keep"
    record_every: int = 10

    def tags(self) -> list[str]:
        return [t.strip() for t in self.methods.split(",") if t.strip()]


@dataclass
class IOConfig:
    out_dir: str = "results"
    surfaces_dir: str = ""


@dataclass
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    method: MethodConfig = field(default_factory=MethodConfig)
    vqe: VQEConfig = field(default_factory=VQEConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    io: IOConfig = field(default_factory=IOConfig)
    source_text: str = field(default="", repr=False, compare=False)

    def validate(self) -> "RunConfig":
        g, m, v, d = self.geometry, self.method, self.vqe, self.dynamics
        checks = [
            (0.3 <= g.bond_length <= 3.0, "geometry.bond_length must lie in [0.3, 3.0] A"),
            (0.0 < g.angle_deg <= 180.0, "geometry.angle_deg must lie in (0, 180]"),
            (g.window > 0, "geometry.window must be positive"),
            (0 < m.svd_threshold < 1, "method.svd_threshold must lie in (0, 1)"),
            (m.qeom_energies in ("unpenalized", "eigenvalue"), "method.qeom_energies must be unpenalized or eigenvalue"),
            (0 < m.fd_step <= 0.05, "method.fd_step must lie in (0, 0.05] A"),
            (2 <= m.n_states <= 9, "method.n_states must lie in [2, 9]"),
            (m.degeneracy_floor > 0, "method.degeneracy_floor must be positive"),
            (v.grad_tol > 0 and v.opt_tol > 0, "vqe tolerances must be positive"),
            (v.max_layers >= 1 and v.max_iter >= 1, "vqe.max_layers and vqe.max_iter must be >= 1"),
            (d.n_traj >= 1, "dynamics.n_traj must be >= 1"),
            (d.dt > 0 and d.t_max > 0, "dynamics.dt and dynamics.t_max must be positive"),
            (d.omega > 0 and d.mass > 0, "dynamics.omega and dynamics.mass must be positive"),
            (d.temperature >= 0, "dynamics.temperature must be non-negative"),
            (0 <= d.initial_state < m.n_states, "dynamics.initial_state must index a computed state"),
            (d.frustrated in ("keep", "reverse"), "dynamics.frustrated must be keep or reverse"),
            (d.record_every >= 1, "dynamics.record_every must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        ranks = {p.strip() for p in m.pool.split(",") if p.strip()}
        if not ranks or ranks - {"singles", "doubles"}:
            raise ConfigError("method.pool must list singles and/or doubles")
        for tag in m.tags() + d.tags():
            if tag != ORACLE and tag not in METHOD_TAGS:
                raise ConfigError(f"unknown method {tag!r}; choose from {', '.join((ORACLE,) + METHOD_TAGS)}")
        g.grid_values()
        return self

    @property
    def out_dir(self) -> Path:
        return Path(os.environ.get(OUT_DIR_ENV) or self.io.out_dir)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source_text")
        return d


_SECTIONS = {"geometry": GeometryConfig, "method": MethodConfig, "vqe": VQEConfig, "dynamics": DynamicsConfig, "io": IOConfig}


def _convert(value: str, kind, key: str):
    try:
        if kind is bool or kind == "bool":
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind is int or kind == "int":
            return int(value)
        if kind is float or kind == "float":
            return float(value)
        return value.strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot read {value!r} as {getattr(kind, '__name__', kind)}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig(source_text=text)
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        block = getattr(cfg, section)
        known = {f.name: f.type for f in fields(block)}
        for key, value in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            setattr(block, key, _convert(value, known[key], f"{section}.{key}"))
    return cfg.validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text())


def format_config(cfg: RunConfig) -> str:
    """Canonical text form; parsing it gives back an equal config."""
    lines = []
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
        lines.append("")
    return "\n".join(lines)
