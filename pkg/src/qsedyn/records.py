"""Versioned CSV records for surfaces and swarm populations, plus run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from pathlib import Path
from typing import Sequence

import numpy as np

from .properties import SurfaceData

SURFACE_SCHEMA = "surfaces v1"
SWARM_SCHEMA = "swarm v1"


class SchemaError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.12e}"


def _schema_line(text: str, expected: str, path: str) -> list[str]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise SchemaError(f"{path}: missing schema line")
    found = lines[0].split(":", 1)[1].strip()
    if found != expected:
        raise SchemaError(f"{path}: schema {found!r} is not supported (expected {expected!r})")
    return lines[1:]


def surface_columns(n_states: int, with_errors: bool) -> list[str]:
    cols = ["R"] + [f"e{k}" for k in range(n_states)] + [f"f{k}" for k in range(n_states)]
    pairs = [(k, l) for k in range(n_states) for l in range(k + 1, n_states)]
    cols += [f"d{k}{l}" for k, l in pairs]
    if with_errors:
        cols += [f"err_e{k}" for k in range(n_states)] + [f"err_f{k}" for k in range(n_states)]
        cols += [f"err_d{k}{l}" for k, l in pairs]
    return cols + ["method"]


def format_surfaces(surfaces: Sequence[SurfaceData], reference: Sequence[SurfaceData] | None = None) -> str:
    """CSV with energies, forces, upper-triangle couplings and optional errors vs ``reference``."""
    n = surfaces[0].n_states
    pairs = [(k, l) for k in range(n) for l in range(k + 1, n)]
    out = io.StringIO()
    out.write(f"# schema: {SURFACE_SCHEMA}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(surface_columns(n, reference is not None))
    for i, s in enumerate(surfaces):
        row = [s.R, *s.energies, *s.forces, *(s.couplings[k, l] for k, l in pairs)]
        if reference is not None:
            ref = reference[i]
            if abs(ref.R - s.R) > 1e-12:
                raise ValueError("reference grid differs")
            row += list(np.abs(s.energies - ref.energies)) + list(np.abs(s.forces - ref.forces))
            row += [abs(s.couplings[k, l] - ref.couplings[k, l]) for k, l in pairs]
        writer.writerow([_fmt(float(x)) for x in row] + [s.method])
    return out.getvalue()


def write_surfaces(path: str | Path, surfaces: Sequence[SurfaceData], reference: Sequence[SurfaceData] | None = None) -> None:
    Path(path).write_text(format_surfaces(surfaces, reference))


def parse_surfaces(text: str, path: str = "<text>") -> list[SurfaceData]:
    rows = list(csv.reader(_schema_line(text, SURFACE_SCHEMA, path)))
    if not rows:
        raise SchemaError(f"{path}: no header")
    head = rows[0]
    n = sum(1 for c in head if c.startswith("e") and c[1:].isdigit())
    if head[: 1 + 2 * n] != surface_columns(n, False)[: 1 + 2 * n] or head[-1] != "method":
        raise SchemaError(f"{path}: unexpected columns {head}")
    col = {c: i for i, c in enumerate(head)}
    out = []
    for row in rows[1:]:
        vals = {c: row[i] for c, i in col.items()}
        d = np.zeros((n, n))
        for k in range(n):
            for l in range(k + 1, n):
                d[k, l] = float(vals[f"d{k}{l}"])
                d[l, k] = -d[k, l]
        out.append(
            SurfaceData(
                R=float(vals["R"]),
                energies=np.array([float(vals[f"e{k}"]) for k in range(n)]),
                forces=np.array([float(vals[f"f{k}"]) for k in range(n)]),
                couplings=d,
                method=vals["method"],
            )
        )
    return out


def read_surfaces(path: str | Path) -> list[SurfaceData]:
    return parse_surfaces(Path(path).read_text(), str(path))


def parse_swarm(text: str, path: str = "<text>") -> dict:
    """Columns of a swarm CSV as arrays keyed by header name."""
    rows = list(csv.reader(_schema_line(text, SWARM_SCHEMA, path)))
    head = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return {c: data[:, i] for i, c in enumerate(head)}


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def environment_versions() -> dict:
    import scipy

    from . import __version__

    return {"qsedyn": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def write_manifest(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
