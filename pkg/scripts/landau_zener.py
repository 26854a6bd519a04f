"""Hop fraction on a linear two-state crossing against the Landau-Zener formula."""

import argparse

import numpy as np

from qsedyn.dynamics import landau_zener_model, landau_zener_probability, run_swarm, speed_for_energy


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--slope", type=float, default=0.05, help="diabatic slope in Ha/A")
    parser.add_argument("--mass", type=float, default=100.0, help="amu")
    parser.add_argument("--energy", type=float, default=5.0, help="initial kinetic energy in Ha")
    parser.add_argument("--n-traj", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    v0 = speed_for_energy(args.energy, args.mass)
    print(f"{'coupling':>9} {'analytic':>9} {'FSSH':>9} {'sigma':>9}")
    for coupling in (0.002, 0.004, 0.006, 0.008):
        model = landau_zener_model(args.slope, coupling, n_grid=2001)
        ic = (np.full(args.n_traj, -0.9), np.full(args.n_traj, v0))
        res = run_swarm(model, ic, dt=0.5, t_max=1.8 / v0, seed=args.seed, mass=args.mass, record_every=1000)
        p = landau_zener_probability(args.slope, coupling, v0)
        sigma = np.sqrt(p * (1 - p) / args.n_traj)
        print(f"{coupling:9.3f} {p:9.4f} {res.populations[-1, 1]:9.4f} {sigma:9.4f}")


if __name__ == "__main__":
    main()
