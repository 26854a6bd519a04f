"""qSE and qEOM projected eigenproblems in the TDA and extended expansion subspaces.

A subspace is spanned by operators ``B_i`` acting on a reference state.
qSE uses the plain products ``<B_i^dag H B_j>`` and ``<B_i^dag B_j>``;
qEOM uses ``<[B_i^dag, H, B_j]>`` and ``<[B_i^dag, B_j]>``.  The TDA basis
holds the excitations ``E_a``, the extended basis appends ``E_a^dag``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mapping import PauliOperator
from .operators import FermionOperator, double_commutator, commutator

QSE = "qse"
QEOM = "qeom"
TDA = "tda"
EXTENDED = "extended"

DEFAULT_SVD_THRESHOLD = 1e-7
ZERO_ENERGY_FLAG = 1e-8


class EmptySolutionError(ValueError):
    pass


class NullStateError(ValueError):
    def __init__(self, index: int, norm2: float):
        super().__init__(f"state {index} has vanishing norm ({norm2:.2e})")
        self.index = index


class DegenerateTrialError(ValueError):
    pass


@dataclass(frozen=True)
class SubspaceSpec:
    method: str = QSE
    subspace: str = TDA
    include_identity: bool | None = None
    svd_threshold: float = DEFAULT_SVD_THRESHOLD

    def __post_init__(self):
        method = self.method.lower()
        subspace = self.subspace.lower()
        if method not in (QSE, QEOM):
            raise ValueError(f"unknown method {self.method!r}")
        if subspace not in (TDA, EXTENDED):
            raise ValueError(f"unknown subspace {self.subspace!r}")
        ident = self.include_identity
        if ident is None:
            ident = method == QSE
        if method == QEOM and ident:
            raise ValueError("qEOM is gauge-fixed and never includes the identity")
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "subspace", subspace)
        object.__setattr__(self, "include_identity", bool(ident))

    @property
    def tag(self) -> str:
        return f"{self.method}_{self.subspace}"

    @classmethod
    def from_tag(cls, tag: str, **kwargs) -> "SubspaceSpec":
        method, _, subspace = tag.lower().partition("_")
        return cls(method=method, subspace=subspace, **kwargs)


@dataclass(frozen=True)
class SubspaceMatrices:
    """Projected ``H`` and ``S`` with the basis that produced them."""

    H: np.ndarray
    S: np.ndarray
    basis_labels: tuple
    spec: SubspaceSpec
    basis_operators: tuple = field(default=(), repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class EigenSolution:
    """Kept eigenpairs of a projected problem.

    For qSE the eigenvalues are absolute energies, ascending, and the
    columns of ``eigenvectors`` are S-orthonormal.  For qEOM they are the
    physical excitation energies (positive metric signature, positive value),
    ascending, normalized to ``X^dag S X = 1``; the full pair spectrum and its
    signatures are kept for diagnostics.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kept_rank: int
    s_condition_number: float
    dropped_singular_values: np.ndarray
    basis_labels: tuple
    spec: SubspaceSpec
    all_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    all_signatures: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    near_zero: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def n_states(self) -> int:
        return len(self.eigenvalues)


# --- operator bases ------------------------------------------------------------------


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, PauliOperator):
        return op.to_matrix()
    return np.asarray(op, dtype=complex)


def _vec(state) -> np.ndarray:
    return np.asarray(getattr(state, "amplitudes", state), dtype=complex)


def translated_generators(state, generators: Sequence[tuple]) -> list[tuple]:
    """``:E: = E - <E> I`` for each ``(label, E)``; returns dense matrices."""
    psi = _vec(state)
    out = []
    for label, e in generators:
        mat = _as_matrix(e)
        shift = np.vdot(psi, mat @ psi)
        out.append((label, mat - shift * np.eye(len(psi))))
    return out


def subspace_basis(spec: SubspaceSpec, generators: Sequence[tuple], dim: int) -> tuple[tuple, tuple]:
    """Labels and dense matrices of the expansion basis for ``spec``.

    Labels are ``"I"`` or ``(label, dagger)``.
    """
    labels = []
    ops = []
    if spec.include_identity:
        labels.append("I")
        ops.append(np.eye(dim, dtype=complex))
    mats = [(lab, _as_matrix(e)) for lab, e in generators]
    for lab, m in mats:
        labels.append((lab, False))
        ops.append(m)
    if spec.subspace == EXTENDED:
        for lab, m in mats:
            labels.append((lab, True))
            ops.append(m.conj().T)
    return tuple(labels), tuple(ops)


def build_qse_matrices(state, h, spec: SubspaceSpec, generators: Sequence[tuple]) -> SubspaceMatrices:
    """``H_ij = <B_i^dag H B_j>`` and ``S_ij = <B_i^dag B_j>`` on ``state``."""
    if spec.method != QSE:
        raise ValueError("build_qse_matrices needs a qSE spec")
    psi = _vec(state)
    hm = _as_matrix(h)
    if hm.shape[0] != len(psi):
        raise ValueError("Hamiltonian and state dimensions differ")
    labels, ops = subspace_basis(spec, generators, len(psi))
    u = np.array([b @ psi for b in ops]).T
    hu = hm @ u
    H = u.conj().T @ hu
    S = u.conj().T @ u
    return SubspaceMatrices(_herm(H), _herm(S), labels, spec, ops)


def build_qeom_matrices(state, h, spec: SubspaceSpec, generators: Sequence[tuple]) -> SubspaceMatrices:
    """Double-commutator ``H`` and commutator ``S`` on ``state``."""
    if spec.method != QEOM:
        raise ValueError("build_qeom_matrices needs a qEOM spec")
    psi = _vec(state)
    hm = _as_matrix(h)
    if hm.shape[0] != len(psi):
        raise ValueError("Hamiltonian and state dimensions differ")
    labels, ops = subspace_basis(spec, generators, len(psi))
    hpsi = hm @ psi
    u = np.array([b @ psi for b in ops]).T  # B_j psi
    w = np.array([b.conj().T @ psi for b in ops]).T  # B_j^dag psi
    y = np.array([b @ hpsi for b in ops]).T  # B_j H psi
    z = np.array([b.conj().T @ hpsi for b in ops]).T  # B_j^dag H psi
    uhu = u.conj().T @ hm @ u
    whw = w.conj().T @ hm @ w
    # <[B_i^dag, H, B_j]> = <Bi^ H Bj> + <Bj H Bi^> - 1/2(<Bi^ Bj H> + <H Bi^ Bj> + <Bj Bi^ H> + <H Bj Bi^>)
    H = uhu + whw.T - 0.5 * (u.conj().T @ y + y.conj().T @ u + (w.conj().T @ z).T + (z.conj().T @ w).T)
    S = u.conj().T @ u - (w.conj().T @ w).T
    return SubspaceMatrices(_herm(H), _herm(S), labels, spec, ops)


def build_matrices(state, h, spec: SubspaceSpec, generators: Sequence[tuple]) -> SubspaceMatrices:
    if spec.method == QSE:
        return build_qse_matrices(state, h, spec, generators)
    return build_qeom_matrices(state, h, spec, generators)


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# --- solving ---------------------------------------------------------------------------


def solve_generalized_eig(m: SubspaceMatrices, svd_threshold: float | None = None) -> EigenSolution:
    """Canonical orthogonalization followed by the reduced eigenproblem."""
    thr = m.spec.svd_threshold if svd_threshold is None else svd_threshold
    s_vals, s_vecs = np.linalg.eigh(m.S)
    mags = np.abs(s_vals)
    top = mags.max(initial=0.0)
    if top < 1e-14:
        raise EmptySolutionError("overlap matrix is numerically zero")
    keep = mags > thr * top
    kept = int(keep.sum())
    cond = float(top / mags[keep].min())
    dropped = np.sort(mags[~keep])[::-1]
    t = s_vecs[:, keep] / np.sqrt(mags[keep])
    hr = t.conj().T @ m.H @ t
    eta = np.sign(s_vals[keep])

    if m.spec.method == QSE:
        if np.any(eta < 0):
            # a qSE overlap is PSD; negative modes beyond the cutoff are noise
            raise EmptySolutionError("qSE overlap has significant negative eigenvalues")
        w, y = np.linalg.eigh(_herm(hr))
        x = t @ y
        return EigenSolution(
            eigenvalues=w,
            eigenvectors=x,
            kept_rank=kept,
            s_condition_number=cond,
            dropped_singular_values=dropped,
            basis_labels=m.basis_labels,
            spec=m.spec,
            all_eigenvalues=w.copy(),
            all_signatures=np.ones(len(w)),
            near_zero=np.abs(w) < ZERO_ENERGY_FLAG,
        )

    w, y = np.linalg.eig(eta[:, None] * hr)
    # pseudo-Hermitian problem: eigenvalues real for a stable reference
    w = w.real if np.abs(w.imag).max(initial=0.0) < 1e-8 * max(1.0, np.abs(w).max()) else w
    sig = np.einsum("ik,i,ik->k", y.conj(), eta, y).real
    x = t @ y
    scale = np.sqrt(np.abs(sig))
    scale[scale == 0] = 1.0
    x = x / scale
    sig_sign = np.sign(sig)
    wr = np.real(w)
    near_zero = np.abs(w) < ZERO_ENERGY_FLAG
    physical = (sig_sign > 0) & (wr > 0) & ~near_zero & (np.abs(np.imag(w)) < 1e-8)
    order = np.argsort(wr[physical])
    idx = np.flatnonzero(physical)[order]
    full_order = np.argsort(wr)
    return EigenSolution(
        eigenvalues=wr[idx],
        eigenvectors=_fix_phase(x[:, idx]),
        kept_rank=kept,
        s_condition_number=cond,
        dropped_singular_values=dropped,
        basis_labels=m.basis_labels,
        spec=m.spec,
        all_eigenvalues=np.asarray(w)[full_order],
        all_signatures=sig_sign[full_order],
        near_zero=near_zero[full_order],
    )


def _fix_phase(x: np.ndarray) -> np.ndarray:
    """Make the largest component of every column real positive."""
    x = x.copy()
    for k in range(x.shape[1]):
        j = int(np.argmax(np.abs(x[:, k])))
        if abs(x[j, k]) > 0:
            x[:, k] *= abs(x[j, k]) / x[j, k]
    return x


def excitation_energies(solution: EigenSolution, e_reference: float | None = None) -> np.ndarray:
    """Excitation energies of the excited states.

    qSE: differences to the lowest qSE root (or ``e_reference`` if given);
    qEOM: the eigenvalues themselves.
    """
    if solution.spec.method == QEOM:
        return solution.eigenvalues.copy()
    e0 = solution.eigenvalues[0] if e_reference is None else e_reference
    return solution.eigenvalues[1:] - e0


# --- diagnostics ---------------------------------------------------------------------


def _state_vectors(state, m: SubspaceMatrices, solution: EigenSolution, translate: bool) -> np.ndarray:
    psi = _vec(state)
    ops = m.basis_operators
    if not ops:
        raise ValueError("matrices carry no basis operators")
    u = np.array([b @ psi for b in ops]).T
    if translate:
        u = u - np.outer(psi, psi.conj() @ u)
    return u @ solution.eigenvectors


def trial_states(state, m: SubspaceMatrices, solution: EigenSolution) -> np.ndarray:
    """Columns ``O_k |psi>``; qEOM operators use translated generators."""
    return _state_vectors(state, m, solution, translate=m.spec.method == QEOM)


def unpenalized_energies(state, h, m: SubspaceMatrices, solution: EigenSolution) -> np.ndarray:
    """``<O_k^dag dH O_k> / <O_k^dag O_k>`` with ``dH = H - <H>`` and translated generators."""
    psi = _vec(state)
    hm = _as_matrix(h)
    e_ref = np.vdot(psi, hm @ psi).real
    phi = _state_vectors(state, m, solution, translate=True)
    out = np.empty(phi.shape[1])
    for k in range(phi.shape[1]):
        n2 = np.vdot(phi[:, k], phi[:, k]).real
        if n2 < 1e-12:
            raise NullStateError(k, n2)
        out[k] = np.vdot(phi[:, k], hm @ phi[:, k]).real / n2 - e_ref
    return out


def check_vacuum_condition(state, m: SubspaceMatrices, solution: EigenSolution) -> np.ndarray:
    """``||O_k^dag |psi>||`` for every kept solution (translated generators)."""
    psi = _vec(state)
    ops = m.basis_operators
    shifts = [np.vdot(psi, b @ psi) for b in ops]
    out = np.empty(solution.n_states)
    for k in range(solution.n_states):
        xk = solution.eigenvectors[:, k]
        v = np.zeros_like(psi)
        for c, b, s in zip(xk, ops, shifts):
            v += np.conj(c) * (b.conj().T @ psi - np.conj(s) * psi)
        out[k] = np.linalg.norm(v)
    return out


def overlap_matrix(states: np.ndarray) -> np.ndarray:
    """Overlaps of normalized columns."""
    n = np.linalg.norm(states, axis=0)
    v = states / n
    return v.conj().T @ v


def trial_operator(m: SubspaceMatrices, coeffs: Sequence[complex]) -> np.ndarray:
    ops = m.basis_operators
    if len(coeffs) != len(ops):
        raise ValueError("coefficient count does not match basis size")
    return sum(c * b for c, b in zip(coeffs, ops))


def evaluate_cost_functions(state, h, trial: np.ndarray) -> tuple[float, float]:
    """``(f_qse, f_qeom)`` for a trial operator ``O``.

    ``f_qse = <O^dag H O>/<O^dag O>`` is an absolute energy and
    ``f_qeom = <[O^dag, H, O]>/<[O^dag, O]>`` an excitation energy.
    """
    psi = _vec(state)
    hm = _as_matrix(h)
    o = np.asarray(trial, dtype=complex)
    u = o @ psi
    w = o.conj().T @ psi
    n_plus = np.vdot(u, u).real
    n_minus = np.vdot(w, w).real
    if n_plus < 1e-14:
        raise DegenerateTrialError("trial operator annihilates the state")
    f_qse = np.vdot(u, hm @ u).real / n_plus
    denom = n_plus - n_minus
    if abs(denom) < 1e-14:
        raise DegenerateTrialError("commutator norm vanishes")
    hpsi = hm @ psi
    num = (
        np.vdot(u, hm @ u)
        + np.vdot(w, hm @ w)
        - 0.5 * (np.vdot(u, o @ hpsi) + np.vdot(o @ hpsi, u) + np.vdot(w, o.conj().T @ hpsi) + np.vdot(o.conj().T @ hpsi, w))
    ).real
    return float(f_qse), float(num / denom)


@dataclass(frozen=True)
class CorrelationDecomposition:
    """``|0> = sqrt(1-gamma^2)|HF> + gamma|u>`` and ``|psi> = sqrt(1-beta^2)|0> + beta|v>``."""

    gamma: float
    u_state: np.ndarray
    beta: float
    v_state: np.ndarray
    e_vqe: float

    def ground(self, hf: np.ndarray) -> np.ndarray:
        return np.sqrt(1 - self.gamma**2) * hf + self.gamma * self.u_state


def _split(target: np.ndarray, ref: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Write ``target = a ref + b r`` with a real positive ``a`` after fixing the phase."""
    ov = np.vdot(ref, target)
    phase = ov / abs(ov) if abs(ov) > 1e-15 else 1.0
    t = target / phase
    rest = t - np.vdot(ref, t) * ref
    b = np.linalg.norm(rest)
    r = rest / b if b > 1e-15 else np.zeros_like(rest)
    return float(b), r, t


def correlation_decomposition(hf, ground, psi_vqe, h) -> CorrelationDecomposition:
    """Decompose the exact ground state against HF and the VQE state against the ground state.

    The ground vector is rephased so its HF overlap is real positive.
    """
    hf = _vec(hf)
    g = _vec(ground)
    psi = _vec(psi_vqe)
    gamma, u, g = _split(g, hf)
    beta, v, _ = _split(psi, g)
    e = np.vdot(psi, _as_matrix(h) @ psi).real
    return CorrelationDecomposition(gamma=gamma, u_state=u, beta=beta, v_state=v, e_vqe=float(e))


def hamiltonian_with_ground_state(h: np.ndarray, new_ground: np.ndarray) -> np.ndarray:
    """Isospectral ``U H U^dag`` whose ground vector is ``new_ground``.

    ``U`` is the rotation in the plane of the old and new ground vectors, so
    everything orthogonal to that plane is left unchanged.
    """
    w, v = np.linalg.eigh(h)
    a = v[:, 0]
    b = np.asarray(new_ground, dtype=complex)
    b = b / np.linalg.norm(b)
    ov = np.vdot(a, b)
    if abs(ov) > 1e-15:
        b = b * abs(ov) / ov
    c = np.vdot(a, b).real
    perp = b - c * a
    s = np.linalg.norm(perp)
    if s < 1e-15:
        return h.copy()
    p = perp / s
    # rotate a -> b inside span{a, p}
    proj = np.outer(a, a.conj()) + np.outer(p, p.conj())
    rot = np.outer(b, a.conj()) + np.outer(c * p - s * a, p.conj())
    u = np.eye(len(a), dtype=complex) - proj + rot
    return u @ h @ u.conj().T


# --- measurement bookkeeping ---------------------------------------------------------


def measurement_cost(spec: SubspaceSpec, d: int) -> tuple[int, str]:
    """Observable count and RDM rank for building the projected matrices."""
    if d < 1:
        raise ValueError("need at least one expansion operator")
    if spec.method == QSE:
        n = d * d if spec.subspace == TDA else (2 * d) ** 2
        return n, "3/2-particle RDMs"
    n = d * d if spec.subspace == TDA else (2 * d) ** 2 // 2
    return n, "2/1-particle RDMs"


def measured_observables(spec: SubspaceSpec, h: FermionOperator, generators: Sequence[FermionOperator]) -> list:
    """Fermionic observables whose expectations fill the projected ``H`` and ``S``."""
    basis = list(generators)
    if spec.subspace == EXTENDED:
        basis += [g.adjoint() for g in generators]
    if spec.include_identity:
        basis = [FermionOperator.identity(h.n_modes)] + basis
    out = []
    for i, bi in enumerate(basis):
        for bj in basis[i:]:
            if spec.method == QSE:
                out.append(bi.adjoint() * h * bj)
                out.append(bi.adjoint() * bj)
            else:
                out.append(double_commutator(bi.adjoint(), h, bj))
                out.append(commutator(bi.adjoint(), bj))
    return out


def max_measured_degree(spec: SubspaceSpec, h: FermionOperator, generators: Sequence[FermionOperator], n_particles: int) -> int:
    return max(op.measured_degree(n_particles) for op in measured_observables(spec, h, generators))


# --- reporting ---------------------------------------------------------------------------


def _label_text(label) -> str:
    if label == "I":
        return "I"
    lab, dag = label
    return ",".join(str(i) for i in lab) + ("^" if dag else "")


def solution_report(m: SubspaceMatrices, solution: EigenSolution, extra: dict | None = None) -> dict:
    """JSON-ready summary of matrices, eigenvalues and conditioning."""
    def cplx(a):
        a = np.asarray(a)
        return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}

    rep = {
        "method": m.spec.method,
        "subspace": m.spec.subspace,
        "basis_labels": [_label_text(lab) for lab in m.basis_labels],
        "H": cplx(m.H),
        "S": cplx(m.S),
        "eigenvalues": solution.eigenvalues.tolist(),
        "kept_rank": solution.kept_rank,
        "s_condition_number": solution.s_condition_number,
        "dropped_singular_values": solution.dropped_singular_values.tolist(),
        "svd_threshold": m.spec.svd_threshold,
    }
    if extra:
        rep.update(extra)
    return rep


def report_json(m: SubspaceMatrices, solution: EigenSolution, extra: dict | None = None) -> str:
    return json.dumps(solution_report(m, solution, extra), indent=2, sort_keys=True)
