import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsedyn.integrals import MolecularGeometry, molecular_integrals
from qsedyn.operators import (
    EmptyPoolError,
    FermionOperator,
    build_hamiltonian,
    commutator,
    double_commutator,
    excitation_pool,
    hartree_fock_occupation,
    number_operator,
)

N = 4

ladder_op = st.tuples(st.integers(0, N - 1), st.integers(0, 1))
term = st.tuples(st.lists(ladder_op, min_size=0, max_size=4), st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
operator = st.lists(term, min_size=1, max_size=4).map(
    lambda ts: sum((FermionOperator.ladder(ops, N, c) for ops, c in ts), FermionOperator.zero(N))
)


@given(st.integers(0, N - 1), st.integers(0, N - 1))
def test_canonical_anticommutation(p, q):
    ap = FermionOperator.annihilate(p, N)
    aq_dag = FermionOperator.create(q, N)
    anti = ap * aq_dag + aq_dag * ap
    expected = FermionOperator.identity(N) if p == q else FermionOperator.zero(N)
    assert anti.allclose(expected)
    mat = ap.to_fock_matrix() @ aq_dag.to_fock_matrix() + aq_dag.to_fock_matrix() @ ap.to_fock_matrix()
    assert np.allclose(mat, np.eye(2**N) * (p == q))


@given(operator, operator)
def test_product_matches_fock_matrices(a, b):
    assert np.allclose((a * b).to_fock_matrix(), a.to_fock_matrix() @ b.to_fock_matrix(), atol=1e-10)


@given(operator)
def test_adjoint_is_conjugate_transpose(a):
    assert np.allclose(a.adjoint().to_fock_matrix(), a.to_fock_matrix().conj().T, atol=1e-12)
    assert a.adjoint().adjoint().allclose(a)


@given(operator, operator, operator)
def test_commutator_identities(a, b, c):
    assert commutator(a, b).allclose(-commutator(b, a), atol=1e-9)
    jacobi = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b))
    assert jacobi.norm() < 1e-8


@given(operator, operator, operator)
def test_double_commutator_is_symmetrized(a, b, c):
    expected = (commutator(commutator(a, b), c) + commutator(a, commutator(b, c))) * 0.5
    assert double_commutator(a, b, c).allclose(expected, atol=1e-9)


@given(operator)
def test_constructed_operators_are_normal_ordered(a):
    assert a.is_normal_ordered()


def test_normal_ordering_preserves_the_operator():
    raw = FermionOperator({((1, 0), (1, 1), (0, 0), (2, 1)): 1.5}, N)
    a1, c1, a0, c2 = (FermionOperator.annihilate(1, N), FermionOperator.create(1, N), FermionOperator.annihilate(0, N), FermionOperator.create(2, N))
    product = a1.to_fock_matrix() @ c1.to_fock_matrix() @ a0.to_fock_matrix() @ c2.to_fock_matrix()
    assert np.allclose(raw.to_fock_matrix(), 1.5 * product)


def test_number_operator_counts_particles():
    n = number_operator(N).to_fock_matrix()
    counts = [bin(i).count("1") for i in range(2**N)]
    assert np.allclose(np.diag(n), counts)


def test_degree_and_measured_degree():
    op = FermionOperator.ladder([(0, 1), (1, 1), (2, 1), (3, 0), (2, 0), (1, 0)], 6)
    assert op.degree == 6
    assert op.measured_degree(3) == 6
    assert op.measured_degree(2) == 0
    assert FermionOperator.identity(4).degree == 0


def test_hamiltonian_is_hermitian_and_reproduces_h2_fci():
    g = MolecularGeometry((("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 0.735))))
    ints, _ = molecular_integrals(g)
    ham = build_hamiltonian(ints)
    assert ham.is_hermitian()
    mat = ham.to_fock_matrix()
    two = [i for i in range(16) if bin(i).count("1") == 2]
    e = np.linalg.eigvalsh(mat[np.ix_(two, two)])
    # PySCF FCI, STO-3G, 0.735 A
    assert e[0] == pytest.approx(-1.1373060357534, abs=1e-9)


def test_hf_determinant_energy_matches_scf(point_08):
    occ = hartree_fock_occupation(3, 2, 1)
    index = sum(1 << j for j in occ)
    mat = point_08.hamiltonian.to_fock_matrix()
    assert mat[index, index].real == pytest.approx(point_08.scf.energy, abs=1e-9)


def test_h3_pool_contents():
    pool = excitation_pool(6, hartree_fock_occupation(3, 2, 1))
    assert pool.labels[:4] == ((2, 0), (2, 1), (4, 3), (5, 3))
    assert len(pool.subset(1)) == 4
    assert len(pool.subset(2)) == 4
    assert len(pool) == 8
    assert all(g.degree == len(lab) for lab, g in pool)


def test_spin_flip_excitations_only_without_spin_conservation():
    occ = hartree_fock_occupation(3, 2, 1)
    assert len(excitation_pool(6, occ, ranks=("singles",), spin_conserving=False)) == 9
    assert len(excitation_pool(6, occ, ranks=("singles",))) == 4


def test_empty_pool_is_rejected():
    with pytest.raises(EmptyPoolError):
        excitation_pool(4, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        FermionOperator.create(5, 4)
