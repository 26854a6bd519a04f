import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qsedyn.mapping import PauliOperator
from qsedyn.simulator import (
    ExponentialCache,
    NotAntiHermitianError,
    NotHermitianError,
    StateVector,
    apply_exponential,
    basis_state,
    exact_diagonalize,
    expectation,
    sector_diagonalize,
)

labels = st.text(alphabet="IXYZ", min_size=3, max_size=3)
real = st.floats(-2.0, 2.0)
hermitian = st.lists(st.tuples(labels, real), min_size=1, max_size=5).map(PauliOperator.from_labels)


def test_basis_state_bit_order():
    s = basis_state(3, "100")
    assert s.amplitudes[1] == 1.0
    assert basis_state(3, 6).amplitudes[6] == 1.0
    with pytest.raises(ValueError):
        basis_state(3, "10")


def test_state_vector_requires_normalization():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]), 1)
    with pytest.raises(ValueError):
        StateVector.from_vector(np.zeros(2))
    s = StateVector.from_vector(np.array([3.0, 4.0]))
    assert s.overlap(s) == pytest.approx(1.0)


@given(hermitian, st.floats(-3.0, 3.0), st.integers(0, 7))
def test_exponential_matches_expm(h, theta, index):
    g = h * 1j
    state = basis_state(3, index)
    out = apply_exponential(state, g, theta)
    assert np.allclose(out.amplitudes, expm(theta * g.to_matrix()) @ state.amplitudes, atol=1e-10)


@given(hermitian)
def test_cached_generator_action(h):
    g = h * 1j
    cache = ExponentialCache([g])
    v = np.arange(8, dtype=complex)
    assert np.allclose(cache.apply_generator(0, v), g.to_matrix() @ v, atol=1e-10)


def test_non_anti_hermitian_generator_is_rejected():
    with pytest.raises(NotAntiHermitianError):
        ExponentialCache([PauliOperator.from_label("XZ")])


@given(hermitian)
def test_exact_diagonalization_and_expectation(h):
    w, v = exact_diagonalize(h)
    assert np.allclose(w, np.linalg.eigvalsh(h.to_matrix()), atol=1e-10)
    assert expectation(v[:, 0], h).real == pytest.approx(w[0], abs=1e-10)


def test_complex_coefficients_are_not_hermitian():
    with pytest.raises(NotHermitianError):
        exact_diagonalize(PauliOperator.from_label("XY", 1j))


def test_sector_diagonalization_restricts_to_number_sector():
    # two qubits, hopping between |01> and |10> plus a constant on |11>
    h = PauliOperator.from_labels([("XX", 0.5), ("YY", 0.5), ("ZZ", 0.25)])
    n_op = PauliOperator.from_labels([("II", 1.0), ("ZI", -0.5), ("IZ", -0.5)])
    w, v = sector_diagonalize(h, [(n_op, 1)])
    assert np.allclose(w, [-1.25, 0.75])
    assert np.allclose(np.abs(v[[0, 3]]), 0.0)
    with pytest.raises(ValueError):
        sector_diagonalize(h, [(n_op, 5)])


def test_oracle_matches_full_diagonalization(point_08):
    w_all = np.linalg.eigvalsh(point_08.h)
    for e in point_08.oracle_energies:
        assert np.abs(w_all - e).min() < 1e-10
