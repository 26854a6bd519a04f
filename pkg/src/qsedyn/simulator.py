"""Dense statevector emulation and the exact-diagonalization oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mapping import PauliOperator

MAX_ORACLE_QUBITS = 12
NORM_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


class NotAntiHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes over ``2**n_qubits`` basis states (index ``sum b_j 2**j``)."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got {amp.shape}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state not normalized (norm {norm:.3e})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_qubits: int | None = None) -> "StateVector":
        vec = np.asarray(vec, dtype=complex)
        if n_qubits is None:
            n_qubits = int(np.log2(len(vec)))
        norm = np.linalg.norm(vec)
        if norm < NORM_TOL:
            raise ValueError("cannot normalize a null vector")
        return cls(vec / norm, n_qubits)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def basis_state(n_qubits: int, bitstring: str | int) -> StateVector:
    """Computational basis state; character ``j`` of ``bitstring`` is qubit ``j``."""
    if isinstance(bitstring, str):
        if len(bitstring) != n_qubits or set(bitstring) - {"0", "1"}:
            raise ValueError(f"bitstring {bitstring!r} does not describe {n_qubits} qubits")
        index = sum(1 << j for j, ch in enumerate(bitstring) if ch == "1")
    else:
        index = int(bitstring)
    amp = np.zeros(1 << n_qubits, dtype=complex)
    amp[index] = 1.0
    return StateVector(amp, n_qubits)


def occupation_bitstring(occupied: Sequence[int], n_qubits: int) -> str:
    occ = set(int(j) for j in occupied)
    return "".join("1" if j in occ else "0" for j in range(n_qubits))


class ExponentialCache:
    """Eigendecompositions of ``iG`` so ``exp(theta G)`` costs two matrix products."""

    def __init__(self, generators: Sequence[PauliOperator | np.ndarray]):
        self._eig = []
        for g in generators:
            mat = g.to_matrix() if isinstance(g, PauliOperator) else np.asarray(g, dtype=complex)
            if not np.allclose(mat, -mat.conj().T, atol=1e-12):
                raise NotAntiHermitianError("generator is not anti-Hermitian")
            w, v = np.linalg.eigh(1j * mat)
            self._eig.append((w, v))

    def __len__(self) -> int:
        return len(self._eig)

    def apply(self, index: int, theta: float, vec: np.ndarray) -> np.ndarray:
        w, v = self._eig[index]
        return v @ (np.exp(-1j * theta * w) * (v.conj().T @ vec))

    def apply_generator(self, index: int, vec: np.ndarray) -> np.ndarray:
        # G = -i (iG) = -i V diag(w) V^dag
        w, v = self._eig[index]
        return -1j * (v @ (w * (v.conj().T @ vec)))


def apply_exponential(state: StateVector, generator: PauliOperator, theta: float) -> StateVector:
    """``exp(theta G) |state>`` for anti-Hermitian ``G``."""
    if generator.n_qubits != state.n_qubits:
        raise ValueError("generator and state act on different qubit counts")
    out = ExponentialCache([generator]).apply(0, theta, state.amplitudes)
    return StateVector.from_vector(out, state.n_qubits)


def expectation(state: StateVector | np.ndarray, op: PauliOperator | np.ndarray) -> complex:
    """``<psi|A|psi>``; real for Hermitian ``A`` up to rounding."""
    vec = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    mat = op.to_matrix() if isinstance(op, PauliOperator) else np.asarray(op)
    if mat.shape[0] != len(vec):
        raise ValueError(f"operator dimension {mat.shape[0]} does not match state dimension {len(vec)}")
    return complex(np.vdot(vec, mat @ vec))


def exact_diagonalize(op: PauliOperator | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum (ascending) and orthonormal eigenvectors of a Hermitian operator."""
    if isinstance(op, PauliOperator):
        if op.n_qubits > MAX_ORACLE_QUBITS:
            raise ValueError(f"dense diagonalization limited to {MAX_ORACLE_QUBITS} qubits")
        if not op.is_hermitian():
            raise NotHermitianError("operator has complex Pauli coefficients")
        mat = op.to_matrix()
    else:
        mat = np.asarray(op, dtype=complex)
        if not np.allclose(mat, mat.conj().T, atol=1e-12):
            raise NotHermitianError("matrix is not Hermitian")
    return np.linalg.eigh(mat)


def sector_diagonalize(
    op: PauliOperator | np.ndarray, number_ops: Sequence[tuple[PauliOperator | np.ndarray, float]]
) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum restricted to the joint eigenspace of diagonal number operators.

    ``number_ops`` pairs each operator with the wanted eigenvalue.  The
    operators must be diagonal in the computational basis (true for
    Jordan-Wigner number operators, also after Z2 tapering).  Eigenvectors
    are returned embedded in the full register.
    """
    mat = op.to_matrix() if isinstance(op, PauliOperator) else np.asarray(op, dtype=complex)
    keep = np.ones(mat.shape[0], dtype=bool)
    for n_op, value in number_ops:
        nm = n_op.to_matrix() if isinstance(n_op, PauliOperator) else np.asarray(n_op)
        off = nm - np.diag(np.diag(nm))
        if np.abs(off).max(initial=0.0) > 1e-12:
            raise ValueError("number operator is not diagonal in the computational basis")
        keep &= np.abs(np.diag(nm).real - value) < 1e-9
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise ValueError("requested symmetry sector is empty")
    w, v = np.linalg.eigh(mat[np.ix_(idx, idx)])
    vecs = np.zeros((mat.shape[0], len(w)), dtype=complex)
    vecs[idx] = v
    return w, vecs
