"""Command line: scan, dynamics, compare and fcidump-export."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dynamics import IntegratorError, SurfaceModel, run_swarm, wigner_sample
from .fcidump import write_fcidump
from .integrals import SCFConvergenceError, molecular_integrals
from .groundstate import OptimizerError
from .pipeline import ORACLE, prepare_points, track_method
from .properties import SurfaceData
from .records import (
    SchemaError,
    environment_versions,
    read_surfaces,
    sha256_file,
    sha256_text,
    write_manifest,
    write_surfaces,
)

log = logging.getLogger("qsedyn")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class AlignmentError(ValueError):
    pass


def surface_path(directory: Path, tag: str) -> Path:
    return directory / f"surfaces_{tag}.csv"


def swarm_path(directory: Path, tag: str) -> Path:
    return directory / f"populations_{tag}.csv"


def crossing_window(reference: Sequence[SurfaceData], half_width: float) -> tuple[float, float]:
    """Interval of ``half_width`` around the smallest ground-to-first-excited gap."""
    gaps = [s.energies[1] - s.energies[0] for s in reference]
    r = reference[int(np.argmin(gaps))].R
    return r - half_width, r + half_width


def error_summary(reference: Sequence[SurfaceData], candidate: Sequence[SurfaceData], half_width: float) -> dict:
    """Per-state max and mean absolute errors, overall and inside the crossing window."""
    grid_ref = np.array([s.R for s in reference])
    grid = np.array([s.R for s in candidate])
    if grid_ref.shape != grid.shape or np.abs(grid_ref - grid).max() > 1e-9:
        raise AlignmentError("surface files do not share an R grid")
    lo, hi = crossing_window(reference, half_width)
    inside = (grid >= lo) & (grid <= hi)
    n = min(reference[0].n_states, candidate[0].n_states)
    pairs = [(k, l) for k in range(n) for l in range(k + 1, n)]

    def stack(surfs, what):
        if what == "couplings":
            return np.array([[s.couplings[k, l] for k, l in pairs] for s in surfs])
        return np.array([getattr(s, what)[:n] for s in surfs])

    out = {"method": candidate[0].method, "reference": reference[0].method, "window": [lo, hi], "n_window": int(inside.sum())}
    for what, labels in (("energies", [f"e{k}" for k in range(n)]), ("forces", [f"f{k}" for k in range(n)]), ("couplings", [f"d{k}{l}" for k, l in pairs])):
        err = np.abs(stack(candidate, what) - stack(reference, what))
        out[what] = {
            lab: {
                "max": float(np.nanmax(err[:, i])),
                "mean": float(np.nanmean(err[:, i])),
                "window_max": float(np.nanmax(err[inside, i])) if inside.any() else float("nan"),
            }
            for i, lab in enumerate(labels)
        }
    return out


def format_summary(summaries: Sequence[dict]) -> str:
    lines = [f"{'method':<15}{'quantity':<10}{'max':>12}{'mean':>12}{'window max':>12}"]
    for s in summaries:
        for what in ("energies", "forces", "couplings"):
            for lab, v in s[what].items():
                lines.append(f"{s['method']:<15}{lab:<10}{v['max']:12.3e}{v['mean']:12.3e}{v['window_max']:12.3e}")
    return "\n".join(lines)


def _manifest(cfg: RunConfig, command: str, extra: dict) -> dict:
    return {
        "command": command,
        "config_sha256": sha256_text(cfg.source_text) if cfg.source_text else None,
        "config": cfg.to_dict(),
        "versions": environment_versions(),
        **extra,
    }


def cmd_scan(cfg: RunConfig, jobs: int = 1) -> dict:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.geometry.grid_values()
    methods = cfg.method.options()
    tags = cfg.method.tags()
    started = time.time()
    points = prepare_points(grid, cfg.geometry.system(), methods, cfg.vqe.options(), jobs)
    reference, _ = track_method(points, ORACLE, methods)
    files = {}
    diagnostics = {}
    status = "ok"
    for tag in [ORACLE] + [t for t in tags if t != ORACLE]:
        try:
            surfaces, notes = (reference, []) if tag == ORACLE else track_method(points, tag, methods)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.error("%s failed: %s", tag, exc)
            status = "partial"
            diagnostics[tag] = {"error": str(exc)}
            continue
        path = surface_path(out, tag)
        write_surfaces(path, surfaces, reference)
        files[tag] = {"path": path.name, "sha256": sha256_file(path)}
        diagnostics[tag] = {
            "weak_overlap_points": [n["R"] for n in notes if n["weak_overlap"]],
            "min_kept_rank": min((n["kept_rank"] for n in notes), default=None),
            "max_s_condition": max((n["s_condition"] for n in notes), default=None),
        }
    lo, hi = crossing_window(reference, cfg.geometry.window)
    manifest = _manifest(
        cfg,
        "scan",
        {
            "status": status,
            "grid": [float(r) for r in grid],
            "crossing_window": [lo, hi],
            "files": files,
            "diagnostics": diagnostics,
            "vqe_layers": {f"{p.R:.4f}": len(p.ansatz.layers) for p in points},
            "vqe_error": {f"{p.R:.4f}": float(p.ansatz.final_energy - p.oracle_energies[0]) for p in points},
        },
    )
    write_manifest(out / "scan_manifest.json", manifest)
    log.info("scan of %d points finished in %.1f s", len(grid), time.time() - started)
    return manifest


def cmd_dynamics(cfg: RunConfig) -> dict:
    d = cfg.dynamics
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    source = Path(cfg.io.surfaces_dir) if cfg.io.surfaces_dir else out
    ic = wigner_sample(d.r0, d.omega, d.mass, d.n_traj, d.seed, d.temperature, d.velocity)
    results = {}
    files = {}
    for tag in d.tags():
        path = surface_path(source, tag)
        if not path.is_file():
            raise FileNotFoundError(f"{path} not found; run 'qsedyn scan' with method {tag} first")
        surfaces = read_surfaces(path)
        model = SurfaceModel.from_surfaces(surfaces, method=tag)
        res = run_swarm(
            model, ic, dt=d.dt, t_max=d.t_max, seed=d.seed, mass=d.mass, initial_state=d.initial_state,
            record_every=d.record_every, reverse_frustrated=d.frustrated == "reverse",
        )
        target = swarm_path(out, tag)
        target.write_text(res.to_csv())
        results[tag] = res
        files[tag] = {
            "path": target.name,
            "sha256": sha256_file(target),
            "surfaces": {"path": str(path), "sha256": sha256_file(path)},
            "n_hops": res.n_hops,
            "n_frustrated": res.n_frustrated,
            "n_terminated": res.n_terminated,
            "max_norm_drift": res.max_norm_drift,
            "status": res.status,
        }
    deviation = {}
    if ORACLE in results:
        ref = results[ORACLE].populations
        for tag, res in results.items():
            if tag != ORACLE:
                deviation[tag] = float(np.abs(res.populations - ref).max())
    status = "partial" if any(r.status != "ok" for r in results.values()) else "ok"
    manifest = _manifest(
        cfg,
        "dynamics",
        {"status": status, "seed": d.seed, "n_traj": d.n_traj, "dt": d.dt, "files": files, "max_population_deviation": deviation},
    )
    write_manifest(out / "dynamics_manifest.json", manifest)
    return manifest


def cmd_compare(paths: Sequence[str], reference: str | None, half_width: float) -> list[dict]:
    loaded = {p: read_surfaces(p) for p in paths}
    if reference is None:
        oracle = [p for p, s in loaded.items() if s[0].method == ORACLE]
        reference = oracle[0] if oracle else paths[0]
    ref = loaded.get(reference) or read_surfaces(reference)
    return [error_summary(ref, s, half_width) for p, s in loaded.items() if p != reference or len(loaded) == 1]


def cmd_fcidump_export(cfg: RunConfig, distances: Sequence[float] | None = None) -> list[Path]:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    system = cfg.geometry.system()
    written = []
    for r in distances if distances else cfg.geometry.grid_values():
        ints, _ = molecular_integrals(system.geometry(float(r)))
        path = out / f"h3_R{float(r):.4f}.fcidump"
        write_fcidump(ints, path)
        written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsedyn", description="Subspace excited states and surface hopping for H2-H.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_method=True):
        p.add_argument("--config", help="INI-style run configuration")
        p.add_argument("--out", help="output directory (overrides io.out_dir)")
        p.add_argument("--seed", type=int, help="dynamics seed")
        if with_method:
            p.add_argument("--method", help="comma-separated method tags")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for the geometry scan")

    common(sub.add_parser("scan", help="excited-state surfaces along the approach coordinate"))
    common(sub.add_parser("dynamics", help="surface-hopping swarm on scanned surfaces"))
    cmp = sub.add_parser("compare", help="error summary of surface files against a reference")
    cmp.add_argument("paths", nargs="+")
    cmp.add_argument("--reference", help="reference surface file (default: the oracle file)")
    cmp.add_argument("--window", type=float, default=0.15, help="half width of the crossing window in A")
    cmp.add_argument("--json", help="write the summary as JSON here")
    exp = sub.add_parser("fcidump-export", help="write FCIDUMP files for grid geometries")
    common(exp, with_method=False)
    exp.add_argument("--distance", type=float, action="append", help="single distance in A (repeatable)")
    return parser


def _configure(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.out:
        cfg.io.out_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.dynamics.seed = args.seed
    if getattr(args, "method", None):
        if args.command == "dynamics":
            cfg.dynamics.methods = args.method
        else:
            cfg.method.methods = args.method
    return cfg.validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            summaries = cmd_compare(args.paths, args.reference, args.window)
            print(format_summary(summaries))
            if args.json:
                Path(args.json).write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        cfg = _configure(args)
        if args.command == "scan":
            manifest = cmd_scan(cfg, args.jobs)
            print(f"surfaces written to {cfg.out_dir} ({manifest['status']})")
            return EXIT_OK if manifest["status"] == "ok" else EXIT_NUMERICAL
        if args.command == "dynamics":
            manifest = cmd_dynamics(cfg)
            for tag, dev in manifest["max_population_deviation"].items():
                print(f"{tag}: max population deviation from oracle {dev:.4f}")
            return EXIT_OK if manifest["status"] == "ok" else EXIT_NUMERICAL
        for path in cmd_fcidump_export(cfg, args.distance):
            print(path)
        return EXIT_OK
    except (ConfigError, SchemaError, AlignmentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SCFConvergenceError, OptimizerError, IntegratorError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
