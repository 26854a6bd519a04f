"""Scan the approach coordinate and print per-method errors against exact diagonalization.

    python3 scripts/run_scan.py --config scripts/h3_default.ini --out results --jobs 4
"""

import argparse

from qsedyn.cli import cmd_compare, cmd_scan, format_summary, surface_path
from qsedyn.config import load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config")
    parser.add_argument("--out")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    cfg = load_config(args.config)
    if args.out:
        cfg.io.out_dir = args.out
    manifest = cmd_scan(cfg, args.jobs)
    lo, hi = manifest["crossing_window"]
    print(f"crossing window {lo:.3f} to {hi:.3f} A, status {manifest['status']}")
    worst_vqe = max(manifest["vqe_error"].values())
    print(f"largest VQE error on the grid {worst_vqe:.1e} Ha")
    paths = [str(surface_path(cfg.out_dir, t)) for t in ["oracle"] + cfg.method.tags()]
    print(format_summary(cmd_compare(paths, paths[0], cfg.geometry.window)))


if __name__ == "__main__":
    main()
