"""Projected property matrices, forces, non-adiabatic couplings and state tracking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .integrals import IntegralSet, MolecularGeometry, _orthonormalize, ao_integrals, mixed_ao_overlap, scf, transform_to_mo
from .operators import FermionOperator, build_hamiltonian
from .subspace import QEOM, SubspaceSpec, _as_matrix, _vec, subspace_basis, translated_generators

DEGENERACY_FLOOR = 1e-8
SPURIOUS_OVERLAP = 0.3
# central-difference step (A) for dH/dR; truncation error ~1e-6 Ha/A on the steep inner wall
FD_STEP = 2.5e-4
MIN_ORBITAL_OVERLAP = 0.5


class OrbitalContinuityError(RuntimeError):
    pass


class DegeneracyError(ValueError):
    pass


class TrackingError(ValueError):
    pass


@dataclass(frozen=True)
class PropertyMatrix:
    A: np.ndarray
    operator: str
    spec: SubspaceSpec | None = None
    basis_labels: tuple = ()

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.A, self.A.conj().T, atol=tol))


def property_basis(state, spec: SubspaceSpec, generators: Sequence[tuple]) -> tuple[tuple, tuple]:
    """Identity followed by the expansion operators.

    qEOM uses the translated generators so the excited states are orthogonal
    to the reference; qSE uses the generators as they are.
    """
    psi = _vec(state)
    gens = translated_generators(psi, generators) if spec.method == QEOM else list(generators)
    basis_spec = SubspaceSpec(method="qse", subspace=spec.subspace, include_identity=True)
    return subspace_basis(basis_spec, gens, len(psi))


def project_operator(state, a, basis: tuple[tuple, tuple], name: str = "A", spec: SubspaceSpec | None = None) -> PropertyMatrix:
    """``A_ij = <psi| B_i^dag A B_j |psi>`` over the basis ``(labels, operators)``."""
    psi = _vec(state)
    labels, ops = basis
    am = _as_matrix(a)
    if am.shape[0] != len(psi):
        raise ValueError("operator and state dimensions differ")
    u = np.array([b @ psi for b in ops]).T
    return PropertyMatrix(u.conj().T @ am @ u, name, spec, tuple(labels))


def _norm2(x: np.ndarray, s: np.ndarray) -> float:
    n2 = np.vdot(x, s @ x).real
    if n2 <= 1e-14:
        raise ValueError("vector has zero norm in the given metric")
    return n2


def transition_amplitude(pm: PropertyMatrix, xk, xl, s) -> complex:
    """``X_k^dag A X_l`` with both vectors normalized in the metric ``s``."""
    xk = np.asarray(xk, dtype=complex)
    xl = np.asarray(xl, dtype=complex)
    return complex(np.vdot(xk, pm.A @ xl) / np.sqrt(_norm2(xk, s) * _norm2(xl, s)))


def adiabatic_force(pm: PropertyMatrix, xk, s) -> float:
    """Diagonal element of the projected derivative operator, i.e. ``d eps_k / dR``."""
    return float(transition_amplitude(pm, xk, xk, s).real)


def nonadiabatic_coupling(pm: PropertyMatrix, xk, xl, ek: float, el: float, s, floor: float = DEGENERACY_FLOOR) -> float:
    """``<k|dH|l> / (e_l - e_k)``, the derivative coupling ``<k| d/dR l>``.

    Real states are assumed; the imaginary part of the amplitude is dropped.
    """
    gap = el - ek
    if abs(gap) < floor:
        raise DegeneracyError(f"gap {gap:.2e} below degeneracy floor {floor:.0e}")
    return float(transition_amplitude(pm, xk, xl, s).real / gap)


def coupling_matrix(pm: PropertyMatrix, coeffs: np.ndarray, energies: Sequence[float], s, floor: float = DEGENERACY_FLOOR) -> np.ndarray:
    """Antisymmetric coupling matrix; undefined entries (degenerate pairs) are NaN."""
    n = coeffs.shape[1]
    d = np.zeros((n, n))
    for k in range(n):
        for l in range(k + 1, n):
            try:
                d[k, l] = nonadiabatic_coupling(pm, coeffs[:, k], coeffs[:, l], energies[k], energies[l], s, floor)
            except DegeneracyError:
                d[k, l] = np.nan
            d[l, k] = -d[k, l]
    return d


# --- Hamiltonian derivatives ---------------------------------------------------------


def align_orbitals(ref_geometry: MolecularGeometry, ref_coeffs: np.ndarray, geometry: MolecularGeometry, coeffs: np.ndarray) -> np.ndarray:
    """Reorder and sign-fix ``coeffs`` to follow the reference orbitals.

    Uses the overlap ``C_ref^T S(ref, new) C_new`` between the two geometries'
    orbital sets.
    """
    o = ref_coeffs.T @ mixed_ao_overlap(ref_geometry, geometry) @ coeffs
    rows, cols = linear_sum_assignment(-np.abs(o))
    best = np.abs(o[rows, cols])
    if best.min() < MIN_ORBITAL_OVERLAP:
        raise OrbitalContinuityError(
            f"orbital overlap {best.min():.3f} below {MIN_ORBITAL_OVERLAP}; use a smaller step"
        )
    out = coeffs[:, cols].copy()
    out *= np.sign(o[rows, cols])
    return out


LOWDIN_FRAME = "lowdin"
SCF_FRAME = "scf"


def aligned_integrals(geometry: MolecularGeometry, ref_geometry: MolecularGeometry, ref_coeffs: np.ndarray, **scf_options) -> IntegralSet:
    """MO integrals at ``geometry`` from a fresh SCF, orbitals matched to a reference set."""
    ao = ao_integrals(geometry)
    res = scf(ao, geometry.n_alpha, geometry.n_beta, guess=ref_coeffs, **scf_options)
    c = align_orbitals(ref_geometry, ref_coeffs, geometry, res.mo_coeffs)
    return transform_to_mo(ao, c)


def lowdin_integrals(geometry: MolecularGeometry, ref_coeffs: np.ndarray) -> IntegralSet:
    """MO integrals at ``geometry`` with the reference coefficients re-orthonormalized.

    The frame ``C (C^T S C)^(-1/2)`` is smooth in the geometry and equals the
    reference at the reference geometry, so it cannot jump between SCF
    solutions.
    """
    ao = ao_integrals(geometry)
    return transform_to_mo(ao, _orthonormalize(np.asarray(ref_coeffs, dtype=float), ao.overlap))


def integral_derivative(
    geometry_path: Callable[[float], MolecularGeometry],
    r: float,
    ref_coeffs: np.ndarray,
    step: float = FD_STEP,
    frame: str = LOWDIN_FRAME,
    **scf_options,
) -> IntegralSet:
    """Central finite difference of the MO integrals along the path, per Angstrom.

    ``frame`` picks how orbitals follow the displacement: ``"lowdin"``
    re-orthonormalizes the reference coefficients, ``"scf"`` reruns the SCF
    and aligns the result.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    if frame == LOWDIN_FRAME:
        plus = lowdin_integrals(geometry_path(r + step), ref_coeffs)
        minus = lowdin_integrals(geometry_path(r - step), ref_coeffs)
    elif frame == SCF_FRAME:
        ref = geometry_path(r)
        plus = aligned_integrals(geometry_path(r + step), ref, ref_coeffs, **scf_options)
        minus = aligned_integrals(geometry_path(r - step), ref, ref_coeffs, **scf_options)
    else:
        raise ValueError(f"unknown orbital frame {frame!r}")
    return IntegralSet(
        h=(plus.h - minus.h) / (2 * step),
        eri=(plus.eri - minus.eri) / (2 * step),
        e_nuc=(plus.e_nuc - minus.e_nuc) / (2 * step),
    )


def hamiltonian_derivative(
    geometry_path: Callable[[float], MolecularGeometry],
    r: float,
    ref_coeffs: np.ndarray,
    step: float = FD_STEP,
    frame: str = LOWDIN_FRAME,
    **scf_options,
) -> FermionOperator:
    """``dH/dR`` in the orbital basis ``ref_coeffs`` of the geometry at ``r``."""
    return build_hamiltonian(integral_derivative(geometry_path, r, ref_coeffs, step, frame, **scf_options))


def finite_difference_coupling(vecs_minus: np.ndarray, vecs: np.ndarray, vecs_plus: np.ndarray, step: float) -> np.ndarray:
    """``<k| d/dR l>`` from eigenvectors at ``R - step``, ``R``, ``R + step``.

    Columns at the displaced points are sign-aligned to those at ``R`` first.
    """
    def phase(v):
        ov = np.einsum("ik,ik->k", vecs.conj(), v)
        return v * (np.abs(ov) / np.where(ov == 0, 1, ov))

    vp = phase(vecs_plus)
    vm = phase(vecs_minus)
    return np.real(vecs.conj().T @ (vp - vm)) / (2 * step)


# --- state tracking --------------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    """``permutation[k]`` is the candidate column continuing tracked state ``k``."""

    permutation: tuple
    signs: tuple
    overlaps: tuple
    spurious: tuple = ()


def match_overlaps(overlap: np.ndarray, threshold: float = SPURIOUS_OVERLAP) -> MatchResult:
    """Greedy assignment on an overlap matrix (rows: tracked states, columns: candidates).

    Pairs are taken in order of decreasing ``|overlap|``, ties by index.
    Candidates whose best overlap with any tracked state is below
    ``threshold`` are flagged spurious and never assigned.
    """
    o = np.asarray(overlap)
    mag = np.abs(o)
    n_prev, n_cand = mag.shape
    spurious = tuple(int(j) for j in range(n_cand) if mag[:, j].max(initial=0.0) < threshold)
    if n_cand - len(spurious) < n_prev:
        raise TrackingError(f"only {n_cand - len(spurious)} usable candidates for {n_prev} tracked states")
    pairs = sorted((-mag[i, j], i, j) for i in range(n_prev) for j in range(n_cand) if j not in spurious)
    perm = [-1] * n_prev
    used = set()
    for _, i, j in pairs:
        if perm[i] < 0 and j not in used:
            perm[i] = j
            used.add(j)
    signs = tuple(1 if o[i, perm[i]].real >= 0 else -1 for i in range(n_prev))
    return MatchResult(tuple(perm), signs, tuple(float(mag[i, perm[i]]) for i in range(n_prev)), spurious)


def match_states(previous: np.ndarray, candidates: np.ndarray, threshold: float = SPURIOUS_OVERLAP) -> MatchResult:
    """Match candidate state vectors (columns) to previously tracked ones."""
    prev = previous / np.linalg.norm(previous, axis=0)
    cand = candidates / np.linalg.norm(candidates, axis=0)
    return match_overlaps(prev.conj().T @ cand, threshold)


def match_states_across_geometries(previous: np.ndarray, candidates: np.ndarray, threshold: float = SPURIOUS_OVERLAP) -> MatchResult:
    return match_states(previous, candidates, threshold)


# --- surface records -------------------------------------------------------------------


@dataclass
class SurfaceData:
    """Energies (Ha), forces (Ha/A) and couplings (1/A) at one reaction coordinate (A)."""

    R: float
    energies: np.ndarray
    forces: np.ndarray
    couplings: np.ndarray
    method: str
    permutation: tuple = ()
    signs: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.couplings, dtype=float)
        ok = np.isfinite(d) & np.isfinite(d.T)
        if np.any(np.abs(d + d.T)[ok] > 1e-12):
            raise ValueError("couplings are not antisymmetric")
        if not np.all(np.isfinite(self.energies)):
            raise ValueError("non-finite energies")

    @property
    def n_states(self) -> int:
        return len(self.energies)
