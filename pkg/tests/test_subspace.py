import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsedyn.subspace import (
    EXTENDED,
    QEOM,
    QSE,
    TDA,
    EmptySolutionError,
    SubspaceSpec,
    build_matrices,
    check_vacuum_condition,
    correlation_decomposition,
    evaluate_cost_functions,
    hamiltonian_with_ground_state,
    measurement_cost,
    report_json,
    solve_generalized_eig,
    trial_states,
    unpenalized_energies,
)

seeds = st.integers(0, 2**32 - 1)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def dc(a, b, c):
    comm = lambda x, y: x @ y - y @ x
    return 0.5 * (comm(comm(a, b), c) + comm(a, comm(b, c)))


def test_spec_defaults_and_validation():
    assert SubspaceSpec(QSE, TDA).include_identity
    assert not SubspaceSpec(QEOM, EXTENDED).include_identity
    assert SubspaceSpec.from_tag("qeom_extended").tag == "qeom_extended"
    with pytest.raises(ValueError):
        SubspaceSpec(QEOM, TDA, include_identity=True)
    with pytest.raises(ValueError):
        SubspaceSpec("cis", TDA)


@given(seeds, st.sampled_from([TDA, EXTENDED]))
def test_qeom_matrices_match_explicit_commutators(point_08, seed, subspace):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, 16)
    gens = point_08.expansion_generators[:3]
    m = build_matrices(psi, point_08.h, SubspaceSpec(QEOM, subspace), gens)
    ops = m.basis_operators
    h_ref = np.array([[np.vdot(psi, dc(bi.conj().T, point_08.h, bj) @ psi) for bj in ops] for bi in ops])
    s_ref = np.array([[np.vdot(psi, (bi.conj().T @ bj - bj @ bi.conj().T) @ psi) for bj in ops] for bi in ops])
    assert np.allclose(m.H, h_ref, atol=1e-10)
    assert np.allclose(m.S, s_ref, atol=1e-10)


@given(seeds)
def test_qse_matrices_are_hermitian_and_psd(point_08, seed):
    psi = random_state(np.random.default_rng(seed), 16)
    m = build_matrices(psi, point_08.h, SubspaceSpec(QSE, EXTENDED), point_08.expansion_generators)
    assert np.allclose(m.H, m.H.conj().T)
    assert np.linalg.eigvalsh(m.S).min() > -1e-12


@given(seeds)
def test_qse_energies_are_variational(point_08, seed):
    psi = random_state(np.random.default_rng(seed), 16)
    sol = solve_generalized_eig(build_matrices(psi, point_08.h, SubspaceSpec(QSE, EXTENDED), point_08.expansion_generators))
    w_all = np.linalg.eigvalsh(point_08.h)
    assert sol.eigenvalues[0] >= w_all[0] - 1e-10
    assert sol.eigenvalues[-1] <= w_all[-1] + 1e-10


def test_qse_eigenvectors_are_s_orthonormal(point_08):
    m = build_matrices(point_08.psi, point_08.h, SubspaceSpec(QSE, TDA), point_08.expansion_generators)
    sol = solve_generalized_eig(m)
    x = sol.eigenvectors
    assert np.allclose(x.conj().T @ m.S @ x, np.eye(sol.n_states), atol=1e-8)
    assert np.allclose(x.conj().T @ m.H @ x, np.diag(sol.eigenvalues), atol=1e-8)


def test_linear_dependence_is_removed(point_08):
    gens = point_08.expansion_generators[:2] + [("dup", 2.0 * point_08.expansion_generators[0][1])]
    sol = solve_generalized_eig(build_matrices(point_08.psi, point_08.h, SubspaceSpec(QSE, TDA), gens))
    assert sol.kept_rank == 3
    assert len(sol.dropped_singular_values) == 1


def test_zero_overlap_is_an_error(point_08):
    zero = [("z", np.zeros((16, 16)))]
    with pytest.raises(EmptySolutionError):
        solve_generalized_eig(build_matrices(point_08.psi, point_08.h, SubspaceSpec(QSE, TDA, include_identity=False), zero))


def test_qeom_solution_normalization_and_pairs(point_064):
    m = build_matrices(point_064.psi, point_064.h, SubspaceSpec(QEOM, EXTENDED), point_064.expansion_generators)
    sol = solve_generalized_eig(m)
    x = sol.eigenvectors
    assert np.allclose(np.einsum("ik,ij,jk->k", x.conj(), m.S, x).real, 1.0)
    w = np.sort(sol.all_eigenvalues.real)
    assert np.allclose(w, -w[::-1], atol=1e-10)
    assert np.all(sol.eigenvalues > 0)


def test_exact_reference_gives_exact_excitations_and_vacuum(point_064):
    m = build_matrices(point_064.psi, point_064.h, SubspaceSpec(QEOM, EXTENDED), point_064.expansion_generators)
    sol = solve_generalized_eig(m)
    exact = point_064.oracle_energies[1:] - point_064.oracle_energies[0]
    assert np.allclose(sol.eigenvalues[: len(exact)], exact, atol=1e-7)
    assert np.allclose(unpenalized_energies(point_064.psi, point_064.h, m, sol)[: len(exact)], exact, atol=1e-7)
    assert check_vacuum_condition(point_064.psi, m, sol).max() < 1e-6
    states = trial_states(point_064.psi, m, sol)
    assert np.abs(point_064.psi.conj() @ states).max() < 1e-6


@given(seeds)
def test_cost_functions_match_direct_expressions(point_08, seed):
    rng = np.random.default_rng(seed)
    psi = point_08.oracle_vectors[:, 0]
    o = sum(rng.normal() * g for _, g in point_08.expansion_generators)
    f_qse, f_qeom = evaluate_cost_functions(psi, point_08.h, o)
    od = o.conj().T
    assert f_qse == pytest.approx((np.vdot(o @ psi, point_08.h @ o @ psi) / np.vdot(o @ psi, o @ psi)).real, rel=1e-10)
    num = np.vdot(psi, dc(od, point_08.h, o) @ psi).real
    den = np.vdot(psi, (od @ o - o @ od) @ psi).real
    assert f_qeom == pytest.approx(num / den, rel=1e-8)


@given(seeds, st.floats(0.0, 0.5))
def test_correlation_decomposition_reconstructs_states(seed, gamma):
    rng = np.random.default_rng(seed)
    hf = np.zeros(8, dtype=complex)
    hf[0] = 1.0
    u = random_state(rng, 8)
    u[0] = 0.0
    u /= np.linalg.norm(u)
    ground = np.sqrt(1 - gamma**2) * hf + gamma * u
    dec = correlation_decomposition(hf, ground * np.exp(0.3j), ground, np.eye(8))
    assert dec.gamma == pytest.approx(gamma, abs=1e-12)
    assert np.allclose(dec.ground(hf), ground)
    assert dec.beta == pytest.approx(0.0, abs=1e-7)


@given(seeds)
def test_ground_state_swap_is_isospectral(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = a + a.conj().T
    target = random_state(rng, 6)
    h2 = hamiltonian_with_ground_state(h, target)
    assert np.allclose(np.linalg.eigvalsh(h2), np.linalg.eigvalsh(h), atol=1e-10)
    assert np.vdot(target, h2 @ target).real == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-10)


def test_measurement_cost_table():
    assert measurement_cost(SubspaceSpec(QSE, TDA), 8) == (64, "3/2-particle RDMs")
    assert measurement_cost(SubspaceSpec(QSE, EXTENDED), 8) == (256, "3/2-particle RDMs")
    assert measurement_cost(SubspaceSpec(QEOM, TDA), 8) == (64, "2/1-particle RDMs")
    assert measurement_cost(SubspaceSpec(QEOM, EXTENDED), 8) == (128, "2/1-particle RDMs")
    with pytest.raises(ValueError):
        measurement_cost(SubspaceSpec(QSE, TDA), 0)


def test_report_is_valid_json(point_08):
    m = build_matrices(point_08.psi, point_08.h, SubspaceSpec(QSE, TDA), point_08.expansion_generators)
    rep = json.loads(report_json(m, solve_generalized_eig(m), {"R": 0.8}))
    assert rep["kept_rank"] == 9
    assert rep["basis_labels"][0] == "I"
    assert rep["R"] == 0.8
