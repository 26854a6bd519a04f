from functools import reduce

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsedyn.mapping import (
    PauliOperator,
    SymmetryViolationError,
    find_z2_symmetries,
    jordan_wigner,
    map_pool,
    select_sector,
    taper,
    taper_bitstring,
    taper_vector,
    untaper_vector,
)
from qsedyn.operators import FermionOperator, excitation_pool, hartree_fock_occupation
from qsedyn.simulator import occupation_bitstring

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}
N = 3


def kron_label(label):
    # qubit 0 is the least significant bit of the basis index
    return reduce(np.kron, [PAULI[ch] for ch in reversed(label)])


labels = st.text(alphabet="IXYZ", min_size=N, max_size=N)
coeffs = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)
pauli_sum = st.lists(st.tuples(labels, coeffs), min_size=1, max_size=5)

ladder_op = st.tuples(st.integers(0, 3), st.integers(0, 1))
fermion = st.lists(st.tuples(st.lists(ladder_op, max_size=4), coeffs), min_size=1, max_size=4).map(
    lambda ts: sum((FermionOperator.ladder(ops, 4, c) for ops, c in ts), FermionOperator.zero(4))
)


@given(pauli_sum)
def test_pauli_matrix_matches_kronecker_products(pairs):
    op = PauliOperator.from_labels(pairs)
    expected = sum(c * kron_label(lab) for lab, c in pairs)
    assert np.allclose(op.to_matrix(), expected)


@given(pauli_sum, pauli_sum)
def test_pauli_product_matches_matrix_product(a, b):
    pa, pb = PauliOperator.from_labels(a), PauliOperator.from_labels(b)
    assert np.allclose((pa * pb).to_matrix(), pa.to_matrix() @ pb.to_matrix(), atol=1e-10)
    assert np.allclose(pa.adjoint().to_matrix(), pa.to_matrix().conj().T)


@given(fermion)
def test_jordan_wigner_matches_fock_matrix(op):
    assert np.allclose(jordan_wigner(op).to_matrix(), op.to_fock_matrix(), atol=1e-10)


@given(fermion, fermion)
def test_jordan_wigner_is_an_algebra_homomorphism(a, b):
    assert jordan_wigner(a * b).allclose(jordan_wigner(a) * jordan_wigner(b), atol=1e-9)


def test_h3_symmetries_and_reference(point_08):
    info = point_08.tapering
    assert info.n_qubits == 6 and info.n_tapered == 4
    gens = sorted(PauliOperator({(0, g): 1.0}, 6).label((0, g)) for g in info.generators)
    assert gens == ["IIIZZZ", "ZZZIII"]
    assert point_08.reference_bitstring == "1110"


def test_tapered_hamiltonian_acts_like_the_full_one_in_sector(point_08):
    hq = jordan_wigner(point_08.hamiltonian)
    info = point_08.tapering
    full = hq.to_matrix()
    rng = np.random.default_rng(3)
    hf = occupation_bitstring(hartree_fock_occupation(3, 2, 1), 6)
    # random vector inside the HF symmetry sector
    mask = np.array([all(bin(i & g).count("1") % 2 == bin(int(hf[::-1], 2) & g).count("1") % 2 for g in info.generators) for i in range(64)])
    v = np.where(mask, rng.normal(size=64) + 1j * rng.normal(size=64), 0)
    v /= np.linalg.norm(v)
    t = taper_vector(v, info)
    assert np.linalg.norm(t) == pytest.approx(1.0)
    assert np.allclose(untaper_vector(t, info), v)
    assert np.allclose(point_08.h @ t, taper_vector(full @ v, info), atol=1e-10)


def test_reference_bitstring_survives_tapering(point_08):
    info = point_08.tapering
    hf = occupation_bitstring(hartree_fock_occupation(3, 2, 1), 6)
    full = np.zeros(64, dtype=complex)
    full[int(hf[::-1], 2)] = 1.0
    t = taper_vector(full, info)
    assert abs(t[int(taper_bitstring(hf, info)[::-1], 2)]) == pytest.approx(1.0)


def test_sector_from_bitstring_or_occupation_agree(point_08):
    info = find_z2_symmetries(jordan_wigner(point_08.hamiltonian))
    occ = hartree_fock_occupation(3, 2, 1)
    assert select_sector(info, occ).sector == select_sector(info, occupation_bitstring(occ, 6)).sector


def test_symmetry_breaking_term_is_rejected(point_08):
    breaking = jordan_wigner(FermionOperator.create(0, 6))
    with pytest.raises(SymmetryViolationError):
        taper(breaking, point_08.tapering)


def test_pool_generators_taper_to_anti_hermitian(point_08):
    pool = excitation_pool(6, hartree_fock_occupation(3, 2, 1))
    for _, g in map_pool(pool, point_08.tapering):
        m = g.to_matrix()
        assert m.shape == (16, 16)
        assert np.allclose(m, -m.conj().T)


def test_hamiltonian_without_symmetry_is_untouched():
    h = PauliOperator.from_labels([("XX", 1.0), ("ZI", 0.5), ("IY", 0.3)])
    info = find_z2_symmetries(h)
    assert not info.generators
    assert taper(h, info).allclose(h)
