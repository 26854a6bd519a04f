import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsedyn.constants import ANGSTROM_TO_BOHR
from qsedyn.integrals import h2_h_geometry
from qsedyn.mapping import jordan_wigner, taper
from qsedyn.operators import build_hamiltonian
from qsedyn.pipeline import attach_derivative, evaluate_method, setup_point, solve_oracle, surface_from_result
from qsedyn.properties import (
    DegeneracyError,
    PropertyMatrix,
    SurfaceData,
    TrackingError,
    coupling_matrix,
    finite_difference_coupling,
    integral_derivative,
    lowdin_integrals,
    match_overlaps,
    match_states,
    nonadiabatic_coupling,
)
from qsedyn.simulator import sector_diagonalize


def oracle_surface(point):
    res = evaluate_method(point, "oracle")
    return surface_from_result(point, res, [0, 1, 2], [1, 1, 1], 1e-8)


def test_nuclear_term_of_the_derivative_is_analytic():
    r = 0.9
    d = integral_derivative(h2_h_geometry, r, setup_point(r).scf.mo_coeffs)
    xyz = h2_h_geometry(r).coordinates
    u = xyz[2] / np.linalg.norm(xyz[2])
    # d/dR sum 1/r_3i in Hartree per Angstrom
    expected = sum(-np.dot(xyz[2] - xyz[i], u) / np.linalg.norm(xyz[2] - xyz[i]) ** 3 for i in range(2)) / ANGSTROM_TO_BOHR
    assert d.e_nuc == pytest.approx(expected, rel=1e-6)


def test_lowdin_frame_is_the_reference_at_the_reference_geometry(point_08):
    ints = lowdin_integrals(point_08.geometry, point_08.scf.mo_coeffs)
    assert np.allclose(ints.h, point_08.integrals.h, atol=1e-10)
    assert np.allclose(ints.eri, point_08.integrals.eri, atol=1e-10)


def test_unknown_frame_is_rejected(point_08):
    with pytest.raises(ValueError):
        integral_derivative(h2_h_geometry, 0.8, point_08.scf.mo_coeffs, frame="canonical")
    with pytest.raises(ValueError):
        integral_derivative(h2_h_geometry, 0.8, point_08.scf.mo_coeffs, step=0.0)


@pytest.mark.parametrize("r", [0.5, 0.64, 0.8, 1.2])
def test_oracle_forces_match_energy_differences(r):
    point = setup_point(r)
    attach_derivative(solve_oracle(point))
    surf = oracle_surface(point)
    h = 1e-4
    e_plus = solve_oracle(setup_point(r + h)).oracle_energies[:3]
    e_minus = solve_oracle(setup_point(r - h)).oracle_energies[:3]
    assert np.allclose(surf.forces, (e_plus - e_minus) / (2 * h), atol=1e-5)


@pytest.mark.parametrize("r", [0.6, 0.64, 0.9])
def test_oracle_couplings_match_eigenvector_differences(r):
    point = setup_point(r)
    attach_derivative(solve_oracle(point))
    h = 1e-4
    vecs = []
    for x in (r - h, r, r + h):
        ints = lowdin_integrals(h2_h_geometry(x), point.scf.mo_coeffs)
        hm = taper(jordan_wigner(build_hamiltonian(ints)), point.tapering).to_matrix()
        vecs.append(sector_diagonalize(hm, point.sector_ops)[1][:, :3])
    fd = finite_difference_coupling(vecs[0], vecs[1], vecs[2], h)
    v = vecs[1]
    e = point.oracle_energies[:3]
    pm = PropertyMatrix(v.conj().T @ point.dH @ v, "dH")
    d = coupling_matrix(pm, np.eye(3), e, np.eye(3))
    assert np.allclose(d, fd, atol=1e-4 * max(1.0, np.abs(fd).max()))


def test_degenerate_coupling_is_undefined():
    pm = PropertyMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), "dH")
    with pytest.raises(DegeneracyError):
        nonadiabatic_coupling(pm, [1, 0], [0, 1], 0.5, 0.5, np.eye(2))
    d = coupling_matrix(pm, np.eye(2), [0.5, 0.5], np.eye(2))
    assert np.isnan(d[0, 1]) and np.isnan(d[1, 0])


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_matching_recovers_a_signed_permutation(seed, n):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(12, n)))
    perm = rng.permutation(n)
    signs = rng.choice([-1, 1], size=n)
    cand = q[:, perm] * signs
    m = match_states(q, cand)
    for k in range(n):
        assert perm[m.permutation[k]] == k
        assert m.signs[k] == signs[m.permutation[k]]
    assert np.allclose(m.overlaps, 1.0)


def test_spurious_candidates_are_flagged():
    o = np.array([[0.9, 0.1, 0.0], [0.1, 0.8, 0.1]])
    m = match_overlaps(o)
    assert m.permutation == (0, 1)
    assert m.spurious == (2,)
    with pytest.raises(TrackingError):
        match_overlaps(np.array([[0.9, 0.1], [0.1, 0.2]]))


def test_surface_record_validation():
    with pytest.raises(ValueError):
        SurfaceData(0.5, np.zeros(2), np.zeros(2), np.array([[0.0, 1.0], [1.0, 0.0]]), "x")
    with pytest.raises(ValueError):
        SurfaceData(0.5, np.array([0.0, np.nan]), np.zeros(2), np.zeros((2, 2)), "x")
