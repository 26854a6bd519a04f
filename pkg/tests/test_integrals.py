import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import hyp1f1

from qsedyn.constants import ANGSTROM_TO_BOHR
from qsedyn.integrals import (
    GeometryError,
    MolecularGeometry,
    UnsupportedElementError,
    ao_integrals,
    boys_f0,
    h2_h_geometry,
    molecular_integrals,
    nuclear_repulsion,
    orthonormality_residual,
    scf,
)
from qsedyn.pipeline import setup_point, solve_oracle

# PySCF 2.x, STO-3G, conv_tol 1e-12 (ROHF and the three lowest FCI roots, N_alpha=2, N_beta=1)
PYSCF_H3 = {
    0.65: (-1.1555739478027274, (-1.1809204167255558, -1.148179032411548, -0.5128436277217236)),
    0.8: (-1.3158295015472752, (-1.336527427950291, -1.159118720817832, -0.6906128375200535)),
    1.2: (-1.5024717979704192, (-1.5229277141609014, -1.0907540654192427, -0.9024889282751596)),
}
PYSCF_H2_RHF = -1.116998996754


def h2(d=0.735):
    return MolecularGeometry((("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, d))))


@given(st.floats(min_value=0.0, max_value=60.0))
def test_boys_matches_hypergeometric(t):
    assert boys_f0(t) == pytest.approx(hyp1f1(0.5, 1.5, -t), rel=1e-12, abs=1e-14)


def test_boys_small_argument_branch_is_continuous():
    t = np.array([1e-7, 1e-6 * (1 - 1e-12), 1e-6, 2e-6])
    assert np.allclose(boys_f0(t), hyp1f1(0.5, 1.5, -t), rtol=1e-13)


def test_nuclear_repulsion_by_hand():
    g = h2_h_geometry(0.9)
    xyz = g.coordinates * ANGSTROM_TO_BOHR
    expected = sum(1.0 / np.linalg.norm(xyz[i] - xyz[j]) for i in range(3) for j in range(i + 1, 3))
    assert nuclear_repulsion(g) == pytest.approx(expected, rel=1e-14)


def test_h2_rhf_matches_pyscf():
    _, res = molecular_integrals(h2())
    assert res.energy == pytest.approx(PYSCF_H2_RHF, abs=1e-9)


@pytest.mark.parametrize("r", sorted(PYSCF_H3))
def test_h3_rohf_and_sector_spectrum_match_pyscf(r):
    e_rohf, fci = PYSCF_H3[r]
    point = solve_oracle(setup_point(r))
    assert point.scf.energy == pytest.approx(e_rohf, abs=1e-9)
    assert np.allclose(point.oracle_energies[:3], fci, atol=1e-9)


def test_ao_matrices_are_symmetric_with_unit_diagonal():
    ao = ao_integrals(h2_h_geometry(0.7))
    assert np.allclose(ao.overlap, ao.overlap.T)
    assert np.allclose(np.diag(ao.overlap), 1.0, atol=1e-7)
    assert np.allclose(ao.kinetic, ao.kinetic.T)
    assert np.all(np.linalg.eigvalsh(ao.overlap) > 0)
    eri = ao.eri
    assert np.allclose(eri, eri.transpose(1, 0, 3, 2))
    assert np.allclose(eri, eri.transpose(2, 1, 0, 3))


@given(st.tuples(*[st.floats(-3.0, 3.0)] * 3))
def test_scf_energy_is_translation_invariant(shift):
    g = h2_h_geometry(0.9)
    e0 = scf(ao_integrals(g), g.n_alpha, g.n_beta).energy
    moved = g.translated(shift)
    e1 = scf(ao_integrals(moved), moved.n_alpha, moved.n_beta).energy
    assert e1 == pytest.approx(e0, abs=1e-9)


def test_mo_coefficients_are_orthonormal():
    g = h2_h_geometry(0.64)
    ints, res = molecular_integrals(g)
    assert orthonormality_residual(ao_integrals(g), res.mo_coeffs) < 1e-10
    assert np.allclose(ints.h, ints.h.T)
    assert np.allclose(ints.eri, ints.eri.transpose(1, 0, 3, 2))


def test_scf_converges_through_the_crossing_region():
    for r in np.arange(0.60, 0.70 + 1e-9, 0.0025):
        _, res = molecular_integrals(h2_h_geometry(float(r)))
        assert np.isfinite(res.energy)


def test_geometry_validation():
    with pytest.raises(UnsupportedElementError):
        MolecularGeometry((("Xx", (0.0, 0.0, 0.0)),))
    with pytest.raises(GeometryError):
        MolecularGeometry((("H", (0.0, 0.0, float("nan"))),))
    with pytest.raises(GeometryError):
        MolecularGeometry((("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 1.0))), spin_multiplicity=2)
    with pytest.raises(GeometryError):
        ao_integrals(MolecularGeometry((("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 0.0)))))
    with pytest.raises(UnsupportedElementError):
        ao_integrals(MolecularGeometry((("He", (0.0, 0.0, 0.0)),)))


def test_h2_h_geometry_layout():
    g = h2_h_geometry(1.0, bond_length=0.74, angle_deg=90.0)
    xyz = g.coordinates
    assert np.linalg.norm(xyz[0] - xyz[1]) == pytest.approx(0.74)
    assert np.linalg.norm(xyz[2]) == pytest.approx(1.0)
    assert (g.n_alpha, g.n_beta) == (2, 1)
