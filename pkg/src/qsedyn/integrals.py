"""Molecular integrals for all-hydrogen systems in STO-3G, plus ROHF.

Only s-type Gaussians are supported, which is all a minimal hydrogen basis
needs. Other elements have to come in through :mod:`qsedyn.fcidump`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import erf

from .constants import (
    ANGSTROM_TO_BOHR,
    ATOMIC_NUMBERS,
    STO3G_H_COEFFICIENTS,
    STO3G_H_EXPONENTS,
)

logger = logging.getLogger(__name__)


class UnsupportedElementError(ValueError):
    pass


class GeometryError(ValueError):
    pass


class SCFConvergenceError(RuntimeError):
    def __init__(self, message: str, last_delta: float, energy: float):
        super().__init__(message)
        self.last_delta = last_delta
        self.energy = energy


@dataclass(frozen=True)
class MolecularGeometry:
    """Nuclear framework. Positions are in Angstrom."""

    atoms: tuple
    charge: int = 0
    spin_multiplicity: int = 1

    def __post_init__(self):
        atoms = tuple((str(sym), tuple(float(c) for c in pos)) for sym, pos in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for sym, pos in atoms:
            if sym not in ATOMIC_NUMBERS:
                raise UnsupportedElementError(f"unknown element {sym!r}")
            if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
                raise GeometryError(f"invalid position for {sym}: {pos}")
        if self.n_electrons < 1:
            raise GeometryError("geometry must carry at least one electron")
        if (self.n_electrons + self.spin_multiplicity - 1) % 2 != 0 or self.spin_multiplicity < 1:
            raise GeometryError(
                f"multiplicity {self.spin_multiplicity} inconsistent with {self.n_electrons} electrons"
            )
        if self.spin_multiplicity - 1 > self.n_electrons:
            raise GeometryError("multiplicity too high for electron count")

    @property
    def symbols(self) -> list[str]:
        return [sym for sym, _ in self.atoms]

    @property
    def coordinates(self) -> np.ndarray:
        return np.array([pos for _, pos in self.atoms], dtype=float)

    @property
    def charges(self) -> np.ndarray:
        return np.array([ATOMIC_NUMBERS[s] for s in self.symbols], dtype=float)

    @property
    def n_electrons(self) -> int:
        return int(sum(ATOMIC_NUMBERS[s] for s, _ in self.atoms) - self.charge)

    @property
    def n_alpha(self) -> int:
        return (self.n_electrons + self.spin_multiplicity - 1) // 2

    @property
    def n_beta(self) -> int:
        return self.n_electrons - self.n_alpha

    def translated(self, shift: Sequence[float]) -> "MolecularGeometry":
        shift = np.asarray(shift, dtype=float)
        atoms = tuple((s, tuple(np.asarray(p) + shift)) for s, p in self.atoms)
        return MolecularGeometry(atoms, self.charge, self.spin_multiplicity)


def h2_h_geometry(distance: float, bond_length: float = 0.735, angle_deg: float = 88.0) -> MolecularGeometry:
    """H2 along the y axis centred at the origin, third H at ``distance`` from the centre.

    ``angle_deg`` is the angle between the approach direction and the H2 bond;
    90 degrees would give an isosceles (C2v) path through the equilateral point.
    """
    theta = math.radians(angle_deg)
    half = 0.5 * bond_length
    atoms = (
        ("H", (0.0, half, 0.0)),
        ("H", (0.0, -half, 0.0)),
        ("H", (distance * math.sin(theta), distance * math.cos(theta), 0.0)),
    )
    return MolecularGeometry(atoms, charge=0, spin_multiplicity=2)


@dataclass(frozen=True)
class AOIntegralSet:
    """AO integrals in Hartree; ``eri[p, q, r, s]`` is <pq|rs> (physicist order)."""

    overlap: np.ndarray
    kinetic: np.ndarray
    nuclear: np.ndarray
    eri: np.ndarray
    e_nuc: float

    @property
    def n_ao(self) -> int:
        return self.overlap.shape[0]

    @property
    def core_hamiltonian(self) -> np.ndarray:
        return self.kinetic + self.nuclear


@dataclass(frozen=True)
class IntegralSet:
    """Spatial-orbital integrals for the second-quantized Hamiltonian.

    ``eri[p, q, r, s]`` is <pq|rs> in physicist notation. ``n_electrons`` and
    ``ms2`` are optional metadata (FCIDUMP carries them).
    """

    h: np.ndarray
    eri: np.ndarray
    e_nuc: float
    mo_coeffs: Optional[np.ndarray] = None
    n_electrons: Optional[int] = None
    ms2: Optional[int] = None

    def __post_init__(self):
        n = self.h.shape[0]
        if self.h.shape != (n, n) or self.eri.shape != (n, n, n, n):
            raise ValueError(f"inconsistent integral shapes {self.h.shape} / {self.eri.shape}")
        if not (np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.eri)) and math.isfinite(self.e_nuc)):
            raise ValueError("integrals contain non-finite entries")

    @property
    def n_orb(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class SCFResult:
    mo_coeffs: np.ndarray
    energy: float
    mo_energies: np.ndarray
    n_iterations: int
    n_alpha: int
    n_beta: int
    history: list = field(default_factory=list, repr=False)


# --- primitive Gaussian machinery -------------------------------------------------


def boys_f0(t):
    """Zeroth-order Boys function, vectorised; series branch below 1e-6."""
    t = np.asarray(t, dtype=float)
    small = t < 1e-6
    safe = np.where(small, 1.0, t)
    big = 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe))
    series = 1.0 - t / 3.0 + t * t / 10.0
    return np.where(small, series, big)


def _sto3g_primitives(geometry: MolecularGeometry):
    """Flattened primitive arrays: exponent, contraction weight (incl. norm), centre, owner AO."""
    exps = np.array(STO3G_H_EXPONENTS)
    coefs = np.array(STO3G_H_COEFFICIENTS)
    weights = coefs * (2.0 * exps / np.pi) ** 0.75
    # renormalise the contraction so <phi|phi> = 1 exactly
    pair = exps[:, None] + exps[None, :]
    self_overlap = np.einsum("i,j,ij->", weights, weights, (np.pi / pair) ** 1.5)
    weights = weights / math.sqrt(self_overlap)
    coords = geometry.coordinates * ANGSTROM_TO_BOHR
    n_ao = len(coords)
    alpha = np.tile(exps, n_ao)
    w = np.tile(weights, n_ao)
    centre = np.repeat(coords, len(exps), axis=0)
    owner = np.repeat(np.arange(n_ao), len(exps))
    return alpha, w, centre, owner, n_ao


def _contract2(prim: np.ndarray, w: np.ndarray, owner: np.ndarray, n_ao: int) -> np.ndarray:
    out = np.zeros((n_ao, n_ao))
    np.add.at(out, (owner[:, None], owner[None, :]), w[:, None] * w[None, :] * prim)
    return out


def _check_supported(geometry: MolecularGeometry) -> None:
    for sym in geometry.symbols:
        if sym != "H":
            raise UnsupportedElementError(
                f"built-in integral engine handles hydrogen only (got {sym}); "
                "generate integrals externally and load them with qsedyn.fcidump.read_fcidump"
            )
    coords = geometry.coordinates
    for a in range(len(coords)):
        for b in range(a):
            if np.linalg.norm(coords[a] - coords[b]) < 1e-8:
                raise GeometryError(f"nuclei {b} and {a} coincide")


def nuclear_repulsion(geometry: MolecularGeometry) -> float:
    coords = geometry.coordinates * ANGSTROM_TO_BOHR
    z = geometry.charges
    e = 0.0
    for a in range(len(z)):
        for b in range(a):
            e += z[a] * z[b] / np.linalg.norm(coords[a] - coords[b])
    return float(e)


def ao_integrals(geometry: MolecularGeometry) -> AOIntegralSet:
    """Overlap, kinetic, nuclear-attraction and two-electron integrals in STO-3G."""
    _check_supported(geometry)
    alpha, w, centre, owner, n_ao = _sto3g_primitives(geometry)

    a, b = alpha[:, None], alpha[None, :]
    p = a + b
    mu = a * b / p
    diff = centre[:, None, :] - centre[None, :, :]
    rab2 = np.einsum("ijk,ijk->ij", diff, diff)
    k_ab = np.exp(-mu * rab2)
    s_prim = (np.pi / p) ** 1.5 * k_ab
    t_prim = mu * (3.0 - 2.0 * mu * rab2) * s_prim
    gauss_p = (a[..., None] * centre[:, None, :] + b[..., None] * centre[None, :, :]) / p[..., None]

    v_prim = np.zeros_like(s_prim)
    nuclei = geometry.coordinates * ANGSTROM_TO_BOHR
    for zc, c in zip(geometry.charges, nuclei):
        rpc2 = np.sum((gauss_p - c) ** 2, axis=-1)
        v_prim -= zc * 2.0 * np.pi / p * k_ab * boys_f0(p * rpc2)

    # (ij|kl) over primitives, chemist order
    p1 = p[:, :, None, None]
    p2 = p[None, None, :, :]
    pq = p1 * p2
    psum = p1 + p2
    dpq = gauss_p[:, :, None, None, :] - gauss_p[None, None, :, :, :]
    rpq2 = np.sum(dpq * dpq, axis=-1)
    kk = k_ab[:, :, None, None] * k_ab[None, None, :, :]
    eri_prim = 2.0 * np.pi**2.5 / (pq * np.sqrt(psum)) * kk * boys_f0(pq / psum * rpq2)
    wprod = np.einsum("i,j,k,l->ijkl", w, w, w, w)
    chem = np.zeros((n_ao,) * 4)
    idx = np.ix_(owner, owner, owner, owner)
    np.add.at(chem, tuple(np.broadcast_arrays(*idx)), wprod * eri_prim)

    overlap = _contract2(s_prim, w, owner, n_ao)
    return AOIntegralSet(
        overlap=0.5 * (overlap + overlap.T),
        kinetic=_contract2(t_prim, w, owner, n_ao),
        nuclear=_contract2(v_prim, w, owner, n_ao),
        eri=chem.transpose(0, 2, 1, 3).copy(),
        e_nuc=nuclear_repulsion(geometry),
    )


def mixed_ao_overlap(geom_a: MolecularGeometry, geom_b: MolecularGeometry) -> np.ndarray:
    """<chi_mu(A)|chi_nu(B)> between AO sets on two different nuclear frameworks."""
    _check_supported(geom_a)
    _check_supported(geom_b)
    al_a, w_a, c_a, o_a, n_a = _sto3g_primitives(geom_a)
    al_b, w_b, c_b, o_b, n_b = _sto3g_primitives(geom_b)
    p = al_a[:, None] + al_b[None, :]
    mu = al_a[:, None] * al_b[None, :] / p
    diff = c_a[:, None, :] - c_b[None, :, :]
    prim = (np.pi / p) ** 1.5 * np.exp(-mu * np.einsum("ijk,ijk->ij", diff, diff))
    out = np.zeros((n_a, n_b))
    np.add.at(out, (o_a[:, None], o_b[None, :]), w_a[:, None] * w_b[None, :] * prim)
    return out


# --- SCF ----------------------------------------------------------------------------


def scf(
    ao: AOIntegralSet,
    n_alpha: int,
    n_beta: int,
    damping: float = 0.5,
    e_tol: float = 1e-10,
    d_tol: float = 1e-9,
    max_iter: int = 500,
    guess: Optional[np.ndarray] = None,
    diis_start: Optional[int] = 8,
    diis_size: int = 8,
) -> SCFResult:
    """Restricted open-shell Hartree-Fock with fixed Fock damping.

    Closed-shell input reduces to RHF. The effective ROHF Fock operator uses the
    Guest-Saunders canonicalisation: alpha Fock couples open and virtual orbitals,
    beta Fock couples closed and open, the spin average fills everything else.

    Converged when the energy change drops below ``e_tol`` and the largest
    density-matrix change below ``d_tol``.  ``guess`` (MO coefficients, e.g.
    from a neighbouring geometry) replaces the core-Hamiltonian start.

    From iteration ``diis_start`` on, the damped Fock matrix is replaced by a
    Pulay (DIIS) extrapolation over the last ``diis_size`` iterates, with the
    occupied-open-virtual blocks of the effective Fock as error vectors.
    Pass ``diis_start=None`` for plain damping.
    """
    n_ao = ao.n_ao
    if n_alpha < n_beta or n_beta < 0:
        raise ValueError("need n_alpha >= n_beta >= 0")
    if n_alpha > n_ao:
        raise ValueError(f"{n_alpha} alpha electrons do not fit in {n_ao} orbitals")
    hcore = ao.core_hamiltonian
    chem = ao.eri.transpose(0, 2, 1, 3)
    s = ao.overlap

    if guess is None:
        _, c = linalg.eigh(hcore, s)
    else:
        c = _orthonormalize(np.asarray(guess, dtype=float), s)
    f_prev = None
    e_prev = None
    d_prev = None
    history = []
    diis_f: list = []
    diis_e: list = []
    delta_e = float("inf")
    for it in range(1, max_iter + 1):
        da = c[:, :n_alpha] @ c[:, :n_alpha].T
        db = c[:, :n_beta] @ c[:, :n_beta].T
        j = np.einsum("pqrs,rs->pq", chem, da + db)
        ka = np.einsum("prqs,rs->pq", chem, da)
        kb = np.einsum("prqs,rs->pq", chem, db)
        fa = hcore + j - ka
        fb = hcore + j - kb
        energy = 0.5 * np.sum(da * (hcore + fa)) + 0.5 * np.sum(db * (hcore + fb)) + ao.e_nuc
        history.append(energy)

        if e_prev is not None:
            delta_e = abs(energy - e_prev)
            delta_d = max(np.max(np.abs(da - d_prev[0])), np.max(np.abs(db - d_prev[1])))
            if delta_e < e_tol and delta_d < d_tol:
                mo_energies = np.einsum("pi,pq,qi->i", c, 0.5 * (fa + fb), c)
                return SCFResult(c, float(energy), mo_energies, it, n_alpha, n_beta, history)
        e_prev, d_prev = energy, (da, db)

        # effective Fock in the current MO basis
        fc = c.T @ (0.5 * (fa + fb)) @ c
        fa_mo = c.T @ fa @ c
        fb_mo = c.T @ fb @ c
        closed = slice(0, n_beta)
        open_ = slice(n_beta, n_alpha)
        virt = slice(n_alpha, n_ao)
        feff = fc.copy()
        feff[closed, open_] = fb_mo[closed, open_]
        feff[open_, closed] = fb_mo[open_, closed]
        feff[open_, virt] = fa_mo[open_, virt]
        feff[virt, open_] = fa_mo[virt, open_]
        sc = s @ c
        f_ao = sc @ feff @ sc.T
        use_diis = diis_start is not None and it >= diis_start
        if use_diis:
            grad = np.zeros_like(feff)
            grad[closed, n_beta:] = feff[closed, n_beta:]
            grad[open_, virt] = feff[open_, virt]
            grad = grad - grad.T
            diis_f.append(f_ao)
            diis_e.append(sc @ grad @ sc.T)
            del diis_f[:-diis_size], diis_e[:-diis_size]
            f_ao = _diis_extrapolate(diis_f, diis_e)
        elif f_prev is not None and damping > 0.0:
            f_ao = (1.0 - damping) * f_ao + damping * f_prev
        f_prev = f_ao
        _, c_new = linalg.eigh(f_ao, s)
        c = _fix_signs(c_new)

    raise SCFConvergenceError(
        f"SCF not converged in {max_iter} iterations (last |dE| = {delta_e:.3e})",
        last_delta=delta_e,
        energy=float(history[-1]),
    )


def _diis_extrapolate(focks: list, errors: list) -> np.ndarray:
    n = len(focks)
    if n < 2:
        return focks[-1]
    b = -np.ones((n + 1, n + 1))
    b[n, n] = 0.0
    for i in range(n):
        for j in range(i, n):
            b[i, j] = b[j, i] = np.sum(errors[i] * errors[j])
    rhs = np.zeros(n + 1)
    rhs[n] = -1.0
    try:
        coef = np.linalg.solve(b, rhs)[:n]
    except np.linalg.LinAlgError:
        return focks[-1]
    return sum(c * f for c, f in zip(coef, focks))


def _orthonormalize(c: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Symmetric (Loewdin) orthonormalization of ``c`` under the metric ``s``."""
    if c.shape != s.shape:
        raise ValueError(f"guess of shape {c.shape} does not match {s.shape[0]} AOs")
    m = c.T @ s @ c
    w, v = np.linalg.eigh(m)
    return c @ (v / np.sqrt(w)) @ v.T


def _fix_signs(c: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude coefficient of each column positive."""
    idx = np.argmax(np.abs(c), axis=0)
    signs = np.sign(c[idx, np.arange(c.shape[1])])
    signs[signs == 0] = 1.0
    return c * signs


def transform_to_mo(ao: AOIntegralSet, mo_coeffs: np.ndarray, **metadata) -> IntegralSet:
    """Rotate AO integrals into the MO basis given by the columns of ``mo_coeffs``."""
    c = np.asarray(mo_coeffs, dtype=float)
    if c.ndim != 2 or c.shape[0] != ao.n_ao:
        raise ValueError(f"MO coefficients of shape {c.shape} do not match {ao.n_ao} AOs")
    h = c.T @ ao.core_hamiltonian @ c
    eri = np.einsum("pqrs,pi,qj,rk,sl->ijkl", ao.eri, c, c, c, c, optimize=True)
    return IntegralSet(h=0.5 * (h + h.T), eri=eri, e_nuc=ao.e_nuc, mo_coeffs=c, **metadata)


def orthonormality_residual(ao: AOIntegralSet, mo_coeffs: np.ndarray) -> float:
    c = mo_coeffs
    return float(np.max(np.abs(c.T @ ao.overlap @ c - np.eye(c.shape[1]))))


SCF_FALLBACKS = (
    {},
    {"diis_size": 4},
    {"diis_start": None, "damping": 0.7, "max_iter": 5000},
)


def molecular_integrals(geometry: MolecularGeometry, **scf_options) -> tuple[IntegralSet, SCFResult]:
    """AO integrals, ROHF and MO transformation in one call.

    Without explicit ``scf_options`` the settings in ``SCF_FALLBACKS`` are
    tried in turn; near orbital near-degeneracies plain DIIS can cycle.
    """
    ao = ao_integrals(geometry)
    attempts = [scf_options] if scf_options else SCF_FALLBACKS
    for k, options in enumerate(attempts):
        try:
            result = scf(ao, geometry.n_alpha, geometry.n_beta, **options)
            break
        except SCFConvergenceError:
            if k == len(attempts) - 1:
                raise
            logger.info("SCF settings %s failed; trying %s", options, attempts[k + 1])
    ints = transform_to_mo(
        ao,
        result.mo_coeffs,
        n_electrons=geometry.n_electrons,
        ms2=geometry.n_alpha - geometry.n_beta,
    )
    return ints, result
