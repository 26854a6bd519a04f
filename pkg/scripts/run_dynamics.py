"""Surface hopping on scanned surfaces; prints excited-state populations over time.

Run scripts/run_scan.py first with the same output directory.

    python3 scripts/run_dynamics.py --config scripts/h3_default.ini --out results
"""

import argparse

import numpy as np

from qsedyn.cli import cmd_dynamics, swarm_path
from qsedyn.config import load_config
from qsedyn.records import parse_swarm


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config")
    parser.add_argument("--out")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--every", type=float, default=100.0, help="print interval in atomic time units")
    args = parser.parse_args()
    cfg = load_config(args.config)
    if args.out:
        cfg.io.out_dir = args.out
    if args.seed is not None:
        cfg.dynamics.seed = args.seed
    manifest = cmd_dynamics(cfg)
    tags = cfg.dynamics.tags()
    data = {t: parse_swarm(swarm_path(cfg.out_dir, t).read_text()) for t in tags}
    t = data[tags[0]]["t"]
    print("t/atu " + " ".join(f"{tag:>14}" for tag in tags))
    for i in np.flatnonzero(np.isclose(np.mod(t, args.every), 0) | (t == t[-1])):
        excited = [1.0 - data[tag]["pop0"][i] for tag in tags]
        print(f"{t[i]:5.0f} " + " ".join(f"{p:14.4f}" for p in excited))
    for tag, dev in manifest["max_population_deviation"].items():
        print(f"{tag}: max deviation from oracle {dev:.4f}")


if __name__ == "__main__":
    main()
