"""Per-geometry excited-state pipeline for the H2-H collision coordinate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .groundstate import AnsatzState, VQEOptions, adapt_vqe, prepare_state
from .integrals import IntegralSet, MolecularGeometry, SCFResult, h2_h_geometry, mixed_ao_overlap, molecular_integrals
from .mapping import (
    TaperingInfo,
    find_z2_symmetries,
    jordan_wigner,
    map_pool,
    select_sector,
    taper,
    taper_bitstring,
    untaper_vector,
)
from .operators import ExcitationPool, FermionOperator, build_hamiltonian, excitation_pool, hartree_fock_occupation, number_operator
from .properties import (
    DEGENERACY_FLOOR,
    FD_STEP,
    SPURIOUS_OVERLAP,
    PropertyMatrix,
    SurfaceData,
    coupling_matrix,
    hamiltonian_derivative,
    match_overlaps,
    project_operator,
    property_basis,
)
from .simulator import occupation_bitstring, sector_diagonalize
from .subspace import (
    QEOM,
    QSE,
    SubspaceSpec,
    build_matrices,
    solve_generalized_eig,
    unpenalized_energies,
)

log = logging.getLogger(__name__)

ORACLE = "oracle"
METHOD_TAGS = ("qse_tda", "qse_extended", "qeom_tda", "qeom_extended")


@dataclass(frozen=True)
class SystemOptions:
    bond_length: float = 0.735
    angle_deg: float = 88.0
    charge: int = 0
    multiplicity: int = 2

    def geometry(self, r: float) -> MolecularGeometry:
        return h2_h_geometry(r, bond_length=self.bond_length, angle_deg=self.angle_deg)


@dataclass(frozen=True)
class MethodOptions:
    """Knobs shared by the subspace methods.

    ``pool_ranks`` sets the expansion operators; ``tda_identity`` adds the
    reference state to the qSE TDA basis; ``qeom_energies`` picks between the
    raw pseudo-eigenvalues (``"eigenvalue"``) and the unpenalized energies.
    """

    pool_ranks: tuple = ("singles", "doubles")
    tda_identity: bool = False
    extended_identity: bool = True
    svd_threshold: float = 1e-7
    qeom_energies: str = "unpenalized"
    fd_step: float = FD_STEP
    n_states: int = 3
    degeneracy_floor: float = DEGENERACY_FLOOR

    def spec(self, tag: str) -> SubspaceSpec:
        method, _, subspace = tag.partition("_")
        ident = None
        if method == QSE:
            ident = self.tda_identity if subspace == "tda" else self.extended_identity
        return SubspaceSpec(method=method, subspace=subspace, include_identity=ident, svd_threshold=self.svd_threshold)


@dataclass
class GeometryPoint:
    """Everything about one geometry that does not depend on the excited-state method."""

    R: float
    geometry: MolecularGeometry
    integrals: IntegralSet
    scf: SCFResult
    hamiltonian: FermionOperator
    tapering: TaperingInfo
    h: np.ndarray
    pool: ExcitationPool
    uccsd_generators: list
    expansion_generators: list
    reference_bitstring: str
    sector_ops: list
    dH: np.ndarray | None = None
    ansatz: AnsatzState | None = None
    psi: np.ndarray | None = None
    oracle_energies: np.ndarray | None = None
    oracle_vectors: np.ndarray | None = None

    @property
    def n_qubits(self) -> int:
        return self.tapering.n_tapered


def setup_point(r: float, system: SystemOptions = SystemOptions(), methods: MethodOptions = MethodOptions()) -> GeometryPoint:
    geometry = system.geometry(r)
    ints, scf_result = molecular_integrals(geometry)
    ham = build_hamiltonian(ints)
    n_modes = 2 * ints.n_orb
    occ = hartree_fock_occupation(ints.n_orb, geometry.n_alpha, geometry.n_beta)
    hq = jordan_wigner(ham)
    info = select_sector(find_z2_symmetries(hq), occ)
    h = taper(hq, info).to_matrix()
    pool = excitation_pool(n_modes, occ)
    expansion = excitation_pool(n_modes, occ, ranks=methods.pool_ranks)
    alpha = [p for p in range(ints.n_orb)]
    beta = [p + ints.n_orb for p in range(ints.n_orb)]
    sector_ops = [
        (taper(jordan_wigner(number_operator(n_modes, alpha)), info), geometry.n_alpha),
        (taper(jordan_wigner(number_operator(n_modes, beta)), info), geometry.n_beta),
    ]
    return GeometryPoint(
        R=r,
        geometry=geometry,
        integrals=ints,
        scf=scf_result,
        hamiltonian=ham,
        tapering=info,
        h=h,
        pool=pool,
        uccsd_generators=map_pool(pool, info),
        expansion_generators=[(lab, op.to_matrix()) for lab, op in map_pool(expansion, info, anti_hermitian=False)],
        reference_bitstring=taper_bitstring(occupation_bitstring(occ, n_modes), info),
        sector_ops=sector_ops,
    )


def solve_ground_state(point: GeometryPoint, options: VQEOptions = VQEOptions()) -> GeometryPoint:
    point.ansatz = adapt_vqe(_as_pauli(point), point.uccsd_generators, point.reference_bitstring, options)
    point.psi = prepare_state(point.ansatz, point.uccsd_generators, point.n_qubits)
    return point


def _as_pauli(point: GeometryPoint):
    return taper(jordan_wigner(point.hamiltonian), point.tapering)


def solve_oracle(point: GeometryPoint) -> GeometryPoint:
    w, v = sector_diagonalize(point.h, point.sector_ops)
    point.oracle_energies = w
    point.oracle_vectors = v
    return point


def attach_derivative(point: GeometryPoint, system: SystemOptions = SystemOptions(), step: float = FD_STEP) -> GeometryPoint:
    dh = hamiltonian_derivative(system.geometry, point.R, point.scf.mo_coeffs, step)
    point.dH = taper(jordan_wigner(dh), point.tapering).to_matrix()
    return point


def prepare_point(r: float, system: SystemOptions = SystemOptions(), methods: MethodOptions = MethodOptions(), vqe: VQEOptions = VQEOptions(), with_derivative: bool = True) -> GeometryPoint:
    point = setup_point(r, system, methods)
    solve_oracle(point)
    solve_ground_state(point, vqe)
    if with_derivative:
        attach_derivative(point, system, methods.fd_step)
    return point


@dataclass
class MethodResult:
    """All candidate states of one method at one geometry, ascending in energy.

    ``coeffs`` are columns over ``basis`` (identity first) normalized with
    ``S``; ``vectors`` are the corresponding register states.
    """

    method: str
    energies: np.ndarray
    vectors: np.ndarray
    coeffs: np.ndarray
    basis: tuple
    S: np.ndarray
    raw_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kept_rank: int = 0
    s_condition_number: float = 1.0


def evaluate_oracle(point: GeometryPoint, n_states: int) -> MethodResult:
    w = point.oracle_energies[:n_states]
    v = point.oracle_vectors[:, :n_states]
    basis = (tuple(f"exact{k}" for k in range(n_states)), tuple(np.outer(v[:, k], v[:, 0].conj()) for k in range(n_states)))
    return MethodResult(ORACLE, w.copy(), v.copy(), np.eye(n_states, dtype=complex), basis, np.eye(n_states), w.copy(), n_states, 1.0)


def evaluate_method(point: GeometryPoint, tag: str, methods: MethodOptions = MethodOptions()) -> MethodResult:
    """Solve one subspace method and express its states in the property basis."""
    if tag == ORACLE:
        return evaluate_oracle(point, methods.n_states)
    spec = methods.spec(tag)
    psi = point.psi
    m = build_matrices(psi, point.h, spec, point.expansion_generators)
    sol = solve_generalized_eig(m)
    basis = property_basis(psi, spec, point.expansion_generators)
    u = np.array([b @ psi for b in basis[1]]).T
    s_prop = u.conj().T @ u
    nb = len(basis[0])
    e_vqe = float(np.vdot(psi, point.h @ psi).real)

    if spec.method == QSE:
        offset = 0 if spec.include_identity else 1
        x = np.zeros((nb, sol.n_states), dtype=complex)
        x[offset:offset + sol.eigenvectors.shape[0]] = sol.eigenvectors
        energies = sol.eigenvalues.copy()
        if not spec.include_identity:
            # reference state stands in for the ground state
            ground = np.zeros((nb, 1), dtype=complex)
            ground[0] = 1.0
            x = np.hstack([ground, x])
            energies = np.concatenate([[e_vqe], energies])
    else:
        x = np.zeros((nb, sol.n_states + 1), dtype=complex)
        x[0, 0] = 1.0
        x[1:, 1:] = sol.eigenvectors
        if methods.qeom_energies == "eigenvalue":
            exc = sol.eigenvalues
        else:
            exc = unpenalized_energies(psi, point.h, m, sol)
        energies = np.concatenate([[e_vqe], e_vqe + exc])
    norms = np.sqrt(np.einsum("ik,ij,jk->k", x.conj(), s_prop, x).real)
    x = x / norms
    vectors = u @ x
    order = np.argsort(energies, kind="stable")
    if spec.method == QEOM:
        # keep the reference first; excited roots stay in eigenvalue order
        order = np.arange(len(energies))
    return MethodResult(
        tag,
        energies[order],
        vectors[:, order],
        x[:, order],
        basis,
        s_prop,
        sol.all_eigenvalues,
        sol.kept_rank,
        sol.s_condition_number,
    )


def surface_from_result(point: GeometryPoint, res: MethodResult, picks: Sequence[int], signs: Sequence[int], floor: float) -> SurfaceData:
    """Energies, forces and couplings for the chosen candidate states."""
    coeffs = res.coeffs[:, list(picks)] * np.asarray(signs)
    energies = res.energies[list(picks)]
    if res.method == ORACLE:
        vecs = res.vectors[:, list(picks)] * np.asarray(signs)
        a = vecs.conj().T @ point.dH @ vecs
        s = np.eye(len(picks))
        coeffs_eff = np.eye(len(picks), dtype=complex)
        pm = PropertyMatrix(a, "dH")
    else:
        pm = project_operator(point.psi, point.dH, res.basis, "dH")
        s = res.S
        coeffs_eff = coeffs
    forces = np.array([np.vdot(coeffs_eff[:, k], pm.A @ coeffs_eff[:, k]).real for k in range(len(picks))])
    d = coupling_matrix(pm, coeffs_eff, energies, s, floor)
    return SurfaceData(point.R, energies, forces, d, res.method, tuple(picks), tuple(signs))


# --- cross-geometry overlaps -------------------------------------------------------------


def determinant_overlaps(orbital_overlap: np.ndarray) -> np.ndarray:
    """Overlaps between Jordan-Wigner basis determinants of two orbital sets.

    ``orbital_overlap`` is the spatial-orbital overlap ``C_a^T S_ab C_b``; spin
    orbitals are blocked (alpha then beta) and the result is indexed by the
    2**(2n) occupation-number states of each side.
    """
    n = orbital_overlap.shape[0]
    n_modes = 2 * n
    dim = 1 << n_modes
    occ = [[j for j in range(n_modes) if (i >> j) & 1] for i in range(dim)]
    keys = [(sum(1 for j in o if j < n), sum(1 for j in o if j >= n)) for o in occ]
    out = np.zeros((dim, dim))
    by_key: dict = {}
    for i, k in enumerate(keys):
        by_key.setdefault(k, []).append(i)
    for idx in by_key.values():
        for i in idx:
            ai = [j for j in occ[i] if j < n]
            bi = [j - n for j in occ[i] if j >= n]
            for j in idx:
                aj = [q for q in occ[j] if q < n]
                bj = [q - n for q in occ[j] if q >= n]
                da = np.linalg.det(orbital_overlap[np.ix_(ai, aj)]) if ai else 1.0
                db = np.linalg.det(orbital_overlap[np.ix_(bi, bj)]) if bi else 1.0
                out[i, j] = da * db
    return out


def full_register(point: GeometryPoint, vectors: np.ndarray) -> np.ndarray:
    """Untapered columns for cross-geometry comparisons."""
    return np.array([untaper_vector(vectors[:, k], point.tapering) for k in range(vectors.shape[1])]).T


def cross_overlaps(prev: GeometryPoint, prev_full: np.ndarray, curr: GeometryPoint, curr_full: np.ndarray) -> np.ndarray:
    o = prev.scf.mo_coeffs.T @ mixed_ao_overlap(prev.geometry, curr.geometry) @ curr.scf.mo_coeffs
    t = determinant_overlaps(o)
    return prev_full.conj().T @ t @ curr_full


# --- scans ---------------------------------------------------------------------------------


@dataclass
class ScanResult:
    grid: np.ndarray
    surfaces: dict
    diagnostics: dict = field(default_factory=dict)

    def array(self, tag: str, what: str) -> np.ndarray:
        """Stack ``energies``, ``forces`` or ``couplings`` over the grid."""
        return np.array([getattr(s, what) for s in self.surfaces[tag]])

    def errors(self, tag: str, what: str, reference: str = ORACLE) -> np.ndarray:
        return np.abs(self.array(tag, what) - self.array(reference, what))


def _prepare(args):
    r, system, methods, vqe = args
    return prepare_point(r, system, methods, vqe)


def prepare_points(grid, system=SystemOptions(), methods=MethodOptions(), vqe=VQEOptions(), jobs: int = 1) -> list:
    tasks = [(float(r), system, methods, vqe) for r in grid]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_prepare, tasks))
    return [_prepare(t) for t in tasks]


def track_method(points: Sequence[GeometryPoint], tag: str, methods: MethodOptions = MethodOptions()) -> tuple[list, list]:
    """Surfaces for one method along the grid.

    States are kept in adiabatic (energy) order.  Overlaps with the states of
    the previous point, computed through the determinant overlaps of the two
    orbital sets, fix the signs; at the first point signs are chosen so that
    ``d_0k >= 0``.  Picked states whose best overlap with the previous point
    falls below the spurious threshold are reported in the notes.
    """
    n = methods.n_states
    surfaces = []
    notes = []
    prev_point = None
    prev_full = None
    for point in points:
        res = evaluate_method(point, tag, methods)
        picks = [int(j) for j in np.argsort(res.energies, kind="stable")[:n]]
        full = full_register(point, res.vectors[:, picks])
        signs = [1] * n
        weak: tuple = ()
        if prev_point is not None:
            ov = cross_overlaps(prev_point, prev_full, point, full)
            weak = tuple(k for k in range(n) if np.abs(ov[:, k]).max() < SPURIOUS_OVERLAP)
            match = match_overlaps(ov, threshold=0.0)
            for i, j in enumerate(match.permutation):
                signs[j] = match.signs[i]
            if weak:
                log.info("%s: states %s at R=%.4f barely overlap the previous point", tag, weak, point.R)
        surf = surface_from_result(point, res, picks, signs, methods.degeneracy_floor)
        if prev_point is None:
            signs = [1] + [(-1 if surf.couplings[0, k] < 0 else 1) for k in range(1, n)]
            surf = surface_from_result(point, res, picks, signs, methods.degeneracy_floor)
        surfaces.append(surf)
        notes.append({"R": point.R, "weak_overlap": weak, "kept_rank": res.kept_rank, "s_condition": res.s_condition_number})
        prev_point = point
        prev_full = full * np.asarray(signs)
    return surfaces, notes


def run_scan(grid, tags: Sequence[str] = METHOD_TAGS, system=SystemOptions(), methods=MethodOptions(), vqe=VQEOptions(), jobs: int = 1, points=None) -> ScanResult:
    if points is None:
        points = prepare_points(grid, system, methods, vqe, jobs)
    surfaces = {}
    diagnostics = {}
    for tag in [ORACLE] + [t for t in tags if t != ORACLE]:
        surfaces[tag], diagnostics[tag] = track_method(points, tag, methods)
    return ScanResult(np.asarray(grid, dtype=float), surfaces, diagnostics)
