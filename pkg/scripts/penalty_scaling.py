"""qEOM penalty against ground-state correlation gamma on an isospectral family of Hamiltonians."""

import argparse

import numpy as np

from qsedyn.pipeline import setup_point, solve_oracle
from qsedyn.subspace import correlation_decomposition, evaluate_cost_functions, hamiltonian_with_ground_state


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--distance", type=float, default=0.64)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()
    point = solve_oracle(setup_point(args.distance))
    idx = np.flatnonzero(np.abs(point.oracle_vectors).sum(axis=1) > 0)
    h = point.h[np.ix_(idx, idx)]
    w, v = np.linalg.eigh(h)
    hf = np.zeros(len(idx), dtype=complex)
    hf[list(idx).index(int(point.reference_bitstring[::-1], 2))] = 1.0
    dec = correlation_decomposition(hf, v[:, 0], v[:, 0], h)
    print(f"gamma of the true ground state {dec.gamma:.4f}")
    rng = np.random.default_rng(args.seed)
    o = sum(rng.normal() * g[np.ix_(idx, idx)] for _, g in point.expansion_generators)
    gammas = np.logspace(-3, -1, 9)
    metric = []
    print(f"{'gamma':>10} {'f_qse-e0':>12} {'f_qeom':>12} {'ratio-1':>12}")
    for gamma in gammas:
        ground = np.sqrt(1 - gamma**2) * hf + gamma * dec.u_state
        f_qse, f_qeom = evaluate_cost_functions(ground, hamiltonian_with_ground_state(h, ground), o)
        metric.append(abs(f_qeom / (f_qse - w[0]) - 1.0))
        print(f"{gamma:10.2e} {f_qse - w[0]:12.6f} {f_qeom:12.6f} {metric[-1]:12.3e}")
    print(f"log-log slope {np.polyfit(np.log(gammas), np.log(metric), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
