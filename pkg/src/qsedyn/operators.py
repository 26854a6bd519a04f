"""Second-quantized operator algebra on a finite set of spin-orbitals.

A ladder term is a tuple of ``(mode, dagger)`` pairs read left to right.
Stored terms are always normal ordered: creators left of annihilators, each
group sorted by decreasing mode index. Spin-orbitals are blocked: modes
``0..n_orb-1`` are alpha, ``n_orb..2*n_orb-1`` are beta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from numbers import Number
from typing import Iterable, Sequence

import numpy as np

from .integrals import IntegralSet

PRUNE_TOL = 1e-14

Term = tuple  # tuple[tuple[int, int], ...]


class EmptyPoolError(ValueError):
    pass


def spin_of(mode: int, n_spin_orbitals: int) -> int:
    """0 for alpha, 1 for beta in the blocked ordering."""
    return 0 if mode < n_spin_orbitals // 2 else 1


@lru_cache(maxsize=200_000)
def _normal_order_term(term: Term) -> tuple:
    """Expand one ladder product into normal-ordered terms with relative coefficients."""
    out: dict = {}
    stack = [(term, 1)]
    while stack:
        ops, coeff = stack.pop()
        for i in range(len(ops) - 1):
            (p, dp), (q, dq) = ops[i], ops[i + 1]
            if dp == 0 and dq == 1:
                # a_p a+_q = delta_pq - a+_q a_p
                stack.append((ops[:i] + ((q, 1), (p, 0)) + ops[i + 2 :], -coeff))
                if p == q:
                    stack.append((ops[:i] + ops[i + 2 :], coeff))
                break
            if dp == dq:
                if p == q:
                    break  # a+_p a+_p = 0
                if p < q:
                    stack.append((ops[:i] + ((q, dq), (p, dp)) + ops[i + 2 :], -coeff))
                    break
        else:
            out[ops] = out.get(ops, 0) + coeff
            continue
    return tuple((k, v) for k, v in out.items() if v != 0)


class FermionOperator:
    """Sparse sum of normal-ordered ladder strings with complex coefficients."""

    __slots__ = ("terms", "n_modes")

    def __init__(self, terms: dict | None = None, n_modes: int = 0, *, ordered: bool = False):
        self.n_modes = int(n_modes)
        if terms is None:
            self.terms = {}
        elif ordered:
            self.terms = {k: complex(v) for k, v in terms.items() if abs(v) > PRUNE_TOL}
        else:
            self.terms = _normal_order_dict(terms)
        for term in self.terms:
            for mode, _ in term:
                if not 0 <= mode < self.n_modes:
                    raise ValueError(f"mode {mode} outside 0..{self.n_modes - 1}")

    # construction helpers

    @classmethod
    def identity(cls, n_modes: int, coeff: complex = 1.0) -> "FermionOperator":
        return cls({(): coeff}, n_modes, ordered=True)

    @classmethod
    def zero(cls, n_modes: int) -> "FermionOperator":
        return cls({}, n_modes, ordered=True)

    @classmethod
    def ladder(cls, ops: Sequence[tuple[int, int]], n_modes: int, coeff: complex = 1.0) -> "FermionOperator":
        return cls({tuple((int(m), int(d)) for m, d in ops): coeff}, n_modes)

    @classmethod
    def create(cls, mode: int, n_modes: int) -> "FermionOperator":
        return cls.ladder([(mode, 1)], n_modes)

    @classmethod
    def annihilate(cls, mode: int, n_modes: int) -> "FermionOperator":
        return cls.ladder([(mode, 0)], n_modes)

    @classmethod
    def number(cls, mode: int, n_modes: int) -> "FermionOperator":
        return cls.ladder([(mode, 1), (mode, 0)], n_modes)

    # algebra

    def _check(self, other: "FermionOperator") -> None:
        if self.n_modes != other.n_modes:
            raise ValueError(f"mode-count mismatch: {self.n_modes} vs {other.n_modes}")

    def __add__(self, other):
        if isinstance(other, Number):
            other = FermionOperator.identity(self.n_modes, other)
        self._check(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return FermionOperator(terms, self.n_modes, ordered=True)

    __radd__ = __add__

    def __neg__(self):
        return FermionOperator({k: -v for k, v in self.terms.items()}, self.n_modes, ordered=True)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return FermionOperator({k: v * other for k, v in self.terms.items()}, self.n_modes, ordered=True)
        self._check(other)
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                for k, c in _normal_order_term(k1 + k2):
                    out[k] = out.get(k, 0) + c * v1 * v2
        return FermionOperator(out, self.n_modes, ordered=True)

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def __truediv__(self, other: Number):
        return self * (1.0 / other)

    def adjoint(self) -> "FermionOperator":
        terms = {tuple((m, 1 - d) for m, d in reversed(k)): np.conj(v) for k, v in self.terms.items()}
        return FermionOperator(terms, self.n_modes)

    dagger = adjoint

    def normal_order(self) -> "FermionOperator":
        return FermionOperator(self.terms, self.n_modes)

    # inspection

    def is_normal_ordered(self) -> bool:
        return all(len(_normal_order_term(k)) == 1 and _normal_order_term(k)[0] == (k, 1) for k in self.terms)

    @property
    def degree(self) -> int:
        """Length of the longest normal-ordered term (0 for a pure constant)."""
        return max((len(k) for k in self.terms), default=0)

    def measured_degree(self, n_particles: int) -> int:
        """Degree after dropping terms with no support on ``n_particles``-fermion states.

        A term with more than ``n_particles`` creators (or annihilators) has zero
        expectation value in every state with that particle number.
        """
        degree = 0
        for k in self.terms:
            n_cre = sum(d for _, d in k)
            if n_cre <= n_particles and len(k) - n_cre <= n_particles:
                degree = max(degree, len(k))
        return degree

    def constant(self) -> complex:
        return self.terms.get((), 0.0)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return (self - self.adjoint()).norm() <= tol

    def norm(self) -> float:
        """Sum of absolute coefficients (an upper bound on the operator norm)."""
        return float(sum(abs(v) for v in self.terms.values()))

    def allclose(self, other: "FermionOperator", atol: float = 1e-12) -> bool:
        return (self - other).norm() <= atol

    def __eq__(self, other):
        if not isinstance(other, FermionOperator):
            return NotImplemented
        return self.n_modes == other.n_modes and self.allclose(other, atol=0.0)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"FermionOperator({len(self.terms)} terms, n_modes={self.n_modes})"

    def to_text(self) -> str:
        """Stable debug serialisation, one ``coeff · a†_p ... a_q`` line per term."""
        lines = []
        for k in sorted(self.terms, key=lambda t: (len(t), t)):
            v = self.terms[k]
            ops = " ".join(f"a†_{m}" if d else f"a_{m}" for m, d in k) or "I"
            lines.append(f"({v.real:+.12e}{v.imag:+.12e}j) · {ops}")
        return "\n".join(lines)

    def to_fock_matrix(self) -> np.ndarray:
        """Dense matrix on the 2**n Fock space, built by acting on occupation bitstrings.

        Basis index ``sum_j n_j 2**j``; ``a†_j`` picks up ``(-1)**(occupied modes below j)``.
        Independent of the qubit-mapping code, so it serves as its oracle.
        """
        dim = 2**self.n_modes
        mat = np.zeros((dim, dim), dtype=complex)
        for term, coeff in self.terms.items():
            for col in range(dim):
                state, sign = col, 1
                for mode, dag in reversed(term):
                    occ = (state >> mode) & 1
                    if occ == dag:
                        sign = 0
                        break
                    sign *= -1 if bin(state & ((1 << mode) - 1)).count("1") % 2 else 1
                    state ^= 1 << mode
                if sign:
                    mat[state, col] += sign * coeff
        return mat


def _normal_order_dict(terms: dict) -> dict:
    out: dict = {}
    for k, v in terms.items():
        if v == 0:
            continue
        for kk, c in _normal_order_term(tuple(k)):
            out[kk] = out.get(kk, 0) + c * v
    return {k: complex(v) for k, v in out.items() if abs(v) > PRUNE_TOL}


def commutator(a: FermionOperator, b: FermionOperator) -> FermionOperator:
    return a * b - b * a


def double_commutator(a: FermionOperator, b: FermionOperator, c: FermionOperator) -> FermionOperator:
    """[A, B, C] = ABC + CBA - (ACB + BAC + CAB + BCA) / 2."""
    abc = a * b * c
    cba = c * b * a
    rest = a * c * b + b * a * c + c * a * b + b * c * a
    return abc + cba - 0.5 * rest


def generalized_commutator_L(a: FermionOperator, b: FermionOperator, c: FermionOperator) -> FermionOperator:
    """L(A, B, C) = ABC - (ACB + BAC) / 2; L(A,B,C) + L(C,B,A) is the double commutator."""
    return a * b * c - 0.5 * (a * c * b + b * a * c)


# --- Hamiltonian and excitation pools ---------------------------------------------


def build_hamiltonian(ints: IntegralSet) -> FermionOperator:
    """H = sum h_pq a+_p a_q + 1/2 sum <pq|rs> a+_p a+_q a_s a_r + E_nuc over spin-orbitals."""
    if not (np.all(np.isfinite(ints.h)) and np.all(np.isfinite(ints.eri))):
        raise ValueError("integrals contain NaN or inf")
    n = ints.n_orb
    n_modes = 2 * n
    terms: dict = {}
    if ints.e_nuc != 0.0:
        terms[()] = ints.e_nuc
    for p, q in itertools.product(range(n), repeat=2):
        v = ints.h[p, q]
        if abs(v) <= PRUNE_TOL:
            continue
        for s in (0, 1):
            key = ((p + s * n, 1), (q + s * n, 0))
            terms[key] = terms.get(key, 0) + v
    for p, q, r, s in itertools.product(range(n), repeat=4):
        v = 0.5 * ints.eri[p, q, r, s]
        if abs(v) <= PRUNE_TOL:
            continue
        for sa, sb in itertools.product((0, 1), repeat=2):
            pp, qq, rr, ss = p + sa * n, q + sb * n, r + sa * n, s + sb * n
            if pp == qq or rr == ss:
                continue
            key = ((pp, 1), (qq, 1), (ss, 0), (rr, 0))
            terms[key] = terms.get(key, 0) + v
    return FermionOperator(terms, n_modes)


@dataclass(frozen=True)
class ExcitationPool:
    """Particle-hole excitation operators relative to a reference occupation."""

    generators: tuple
    labels: tuple
    n_modes: int
    reference_occupation: tuple
    ranks: tuple
    spin_conserving: bool = True

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(zip(self.labels, self.generators))

    def subset(self, rank: int) -> "ExcitationPool":
        keep = [i for i, lab in enumerate(self.labels) if len(lab) == 2 * rank]
        return ExcitationPool(
            tuple(self.generators[i] for i in keep),
            tuple(self.labels[i] for i in keep),
            self.n_modes,
            self.reference_occupation,
            (rank,),
            self.spin_conserving,
        )


_RANK_NAMES = {"singles": 1, "doubles": 2, "s": 1, "d": 2}


def excitation_pool(
    n_spin_orbitals: int,
    reference_occupation: Iterable[int],
    ranks: Iterable = ("singles", "doubles"),
    spin_conserving: bool = True,
) -> ExcitationPool:
    """Singles ``a+_m a_i`` and doubles ``a+_m a+_n a_i a_j`` out of the reference.

    Labels are ``(m, i)`` and ``(m, n, i, j)`` with ``m < n`` virtual and
    ``i < j`` occupied. Singles come first, each rank in lexicographic label
    order. With ``spin_conserving`` only S_z-preserving excitations are kept.
    """
    occ = sorted(set(int(i) for i in reference_occupation))
    if any(not 0 <= i < n_spin_orbitals for i in occ):
        raise ValueError("reference occupation outside the mode range")
    virt = [m for m in range(n_spin_orbitals) if m not in occ]
    if not occ or not virt:
        raise EmptyPoolError("reference has no occupied or no virtual spin-orbitals")
    rank_set = sorted({_RANK_NAMES.get(r, r) if isinstance(r, str) else int(r) for r in ranks})

    def spin(m):
        return spin_of(m, n_spin_orbitals)

    singles, doubles = [], []
    if 1 in rank_set:
        singles = [
            (m, i) for i in occ for m in virt if not spin_conserving or spin(m) == spin(i)
        ]
    if 2 in rank_set:
        for i, j in itertools.combinations(occ, 2):
            for m, n in itertools.combinations(virt, 2):
                if spin_conserving and sorted((spin(m), spin(n))) != sorted((spin(i), spin(j))):
                    continue
                doubles.append((m, n, i, j))
    labels = sorted(singles) + sorted(doubles)
    if not labels:
        raise EmptyPoolError("no excitations of the requested ranks")

    gens = []
    for lab in labels:
        if len(lab) == 2:
            m, i = lab
            ops = [(m, 1), (i, 0)]
        else:
            m, n, i, j = lab
            ops = [(m, 1), (n, 1), (i, 0), (j, 0)]
        gens.append(FermionOperator.ladder(ops, n_spin_orbitals))
    return ExcitationPool(
        tuple(gens), tuple(labels), n_spin_orbitals, tuple(occ), tuple(rank_set), spin_conserving
    )


def number_operator(n_modes: int, modes: Iterable[int] | None = None) -> FermionOperator:
    modes = range(n_modes) if modes is None else modes
    out = FermionOperator.zero(n_modes)
    for m in modes:
        out = out + FermionOperator.number(m, n_modes)
    return out


def hartree_fock_occupation(n_orb: int, n_alpha: int, n_beta: int) -> tuple:
    """Aufbau occupation in the blocked ordering."""
    return tuple(range(n_alpha)) + tuple(n_orb + i for i in range(n_beta))
