import numpy as np
import pytest

from qsedyn.groundstate import AnsatzState, VQEOptions, adapt_vqe, prepare_state, vqe_optimize
from qsedyn.pipeline import _as_pauli


def test_adapt_reaches_the_sector_ground_state(point_08):
    a = point_08.ansatz
    assert a.final_energy == pytest.approx(point_08.oracle_energies[0], abs=1e-8)
    assert abs(np.vdot(point_08.oracle_vectors[:, 0], point_08.psi)) == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(a.energy_history) < 0)
    assert a.gradient_norm_at_exit < VQEOptions().grad_tol


def test_prepared_state_reproduces_the_energy(point_064):
    psi = prepare_state(point_064.ansatz, point_064.uccsd_generators, point_064.n_qubits)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert np.vdot(psi, point_064.h @ psi).real == pytest.approx(point_064.ansatz.final_energy, abs=1e-12)


def test_ansatz_text_round_trip(point_08, tmp_path):
    a = point_08.ansatz
    b = AnsatzState.from_text(a.to_text())
    assert b == a
    a.save(tmp_path / "ansatz.txt")
    assert AnsatzState.load(tmp_path / "ansatz.txt") == a


def test_reoptimizing_a_fixed_structure_from_zero(point_08):
    a = point_08.ansatz
    start = AnsatzState(a.reference_bitstring, tuple((lab, 0.0) for lab in a.labels))
    out = vqe_optimize(start, _as_pauli(point_08), point_08.uccsd_generators)
    assert out.final_energy == pytest.approx(a.final_energy, abs=1e-8)


def test_zero_layers_gives_the_reference_energy(point_08):
    a = adapt_vqe(_as_pauli(point_08), point_08.uccsd_generators, point_08.reference_bitstring, VQEOptions(max_layers=0))
    assert a.layers == ()
    assert a.final_energy == pytest.approx(point_08.scf.energy, abs=1e-9)


def test_bad_inputs():
    with pytest.raises(ValueError):
        adapt_vqe(None, [], "1110")
    with pytest.raises(KeyError):
        prepare_state(AnsatzState("1110", (((9, 9), 0.1),)), [], 4)
