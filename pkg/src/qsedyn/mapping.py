"""Pauli operators, the Jordan-Wigner map and Z2 qubit tapering.

A Pauli string is stored as a pair of bitmasks ``(x, z)``; qubit ``j``
carries I, X, Z or Y for ``(x_j, z_j)`` = (0,0), (1,0), (0,1), (1,1).
Labels are written qubit 0 first, so ``"XZII"`` is X on qubit 0.
Basis-state index is ``sum_j b_j 2**j`` with ``|1>`` meaning occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Number
from typing import Iterable, Sequence

import numpy as np

from .operators import FermionOperator

PRUNE_TOL = 1e-14

_LETTER = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTER.items()}

# single-qubit products: (a, b) -> (phase, result) with a, b in "IXYZ"
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


class SymmetryViolationError(ValueError):
    pass


class SectorAmbiguityError(ValueError):
    pass


def _popcount(v: int) -> int:
    return bin(v).count("1")


def _multiply_strings(k1: tuple, k2: tuple) -> tuple[complex, tuple]:
    """Product of two Pauli strings as (phase, string)."""
    x1, z1 = k1
    x2, z2 = k2
    # write P = i^{x.z} X^x Z^z; then P1 P2 = i^{...} (-1)^{z1.x2} X^{x1^x2} Z^{z1^z2}
    x, z = x1 ^ x2, z1 ^ z2
    exponent = _popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x & z) + 2 * _popcount(z1 & x2)
    return 1j ** (exponent % 4), (x, z)


class PauliOperator:
    """Weighted sum of Pauli strings on ``n_qubits`` qubits."""

    __slots__ = ("terms", "n_qubits")

    def __init__(self, terms: dict | None = None, n_qubits: int = 0):
        self.n_qubits = int(n_qubits)
        self.terms = {}
        for k, v in (terms or {}).items():
            if abs(v) > PRUNE_TOL:
                self.terms[k] = complex(v)
        limit = 1 << self.n_qubits
        for x, z in self.terms:
            if x >= limit or z >= limit:
                raise ValueError("Pauli string wider than n_qubits")

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> "PauliOperator":
        x = z = 0
        for j, ch in enumerate(label.upper()):
            bx, bz = _BITS[ch]
            x |= bx << j
            z |= bz << j
        return cls({(x, z): coeff}, len(label))

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, complex]]) -> "PauliOperator":
        out = None
        for label, c in pairs:
            op = cls.from_label(label, c)
            out = op if out is None else out + op
        return out

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls({(0, 0): coeff}, n_qubits)

    @classmethod
    def single(cls, letter: str, qubit: int, n_qubits: int, coeff: complex = 1.0) -> "PauliOperator":
        bx, bz = _BITS[letter]
        return cls({(bx << qubit, bz << qubit): coeff}, n_qubits)

    def label(self, key: tuple) -> str:
        x, z = key
        return "".join(_LETTER[((x >> j) & 1, (z >> j) & 1)] for j in range(self.n_qubits))

    # algebra

    def _check(self, other: "PauliOperator") -> None:
        if self.n_qubits != other.n_qubits:
            raise ValueError(f"qubit-count mismatch: {self.n_qubits} vs {other.n_qubits}")

    def __add__(self, other):
        if isinstance(other, Number):
            other = PauliOperator.identity(self.n_qubits, other)
        self._check(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return PauliOperator(terms, self.n_qubits)

    __radd__ = __add__

    def __neg__(self):
        return PauliOperator({k: -v for k, v in self.terms.items()}, self.n_qubits)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return PauliOperator({k: v * other for k, v in self.terms.items()}, self.n_qubits)
        self._check(other)
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                phase, k = _multiply_strings(k1, k2)
                out[k] = out.get(k, 0) + phase * v1 * v2
        return PauliOperator(out, self.n_qubits)

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def adjoint(self) -> "PauliOperator":
        return PauliOperator({k: np.conj(v) for k, v in self.terms.items()}, self.n_qubits)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(v.imag) <= tol for v in self.terms.values())

    def norm(self) -> float:
        return float(sum(abs(v) for v in self.terms.values()))

    def allclose(self, other: "PauliOperator", atol: float = 1e-12) -> bool:
        return (self - other).norm() <= atol

    def commutes_termwise(self, other: "PauliOperator") -> bool:
        for x1, z1 in self.terms:
            for x2, z2 in other.terms:
                if (_popcount(x1 & z2) + _popcount(z1 & x2)) % 2:
                    return False
        return True

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"PauliOperator({len(self.terms)} terms, n_qubits={self.n_qubits})"

    def to_text(self) -> str:
        """One ``coeff label`` line per term, sorted by label."""
        rows = sorted((self.label(k), v) for k, v in self.terms.items())
        out = []
        for lab, v in rows:
            if abs(v.imag) <= PRUNE_TOL:
                out.append(f"{v.real:.12g} {lab}")
            else:
                out.append(f"({v.real:.12g}{v.imag:+.12g}j) {lab}")
        return "\n".join(out)

    def to_matrix(self) -> np.ndarray:
        """Dense 2**n matrix."""
        dim = 1 << self.n_qubits
        idx = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=complex)
        for (x, z), c in self.terms.items():
            parity = np.zeros(dim, dtype=np.int64)
            zz = z
            j = 0
            while zz:
                if zz & 1:
                    parity ^= (idx >> j) & 1
                zz >>= 1
                j += 1
            phase = (1j ** _popcount(x & z)) * (1 - 2 * parity)
            mat[idx ^ x, idx] += c * phase
        return mat


# --- Jordan-Wigner -----------------------------------------------------------------


def _jw_ladder(mode: int, dagger: int, n: int) -> PauliOperator:
    zmask = (1 << mode) - 1
    bit = 1 << mode
    # a+_j = Z_<j (X_j - iY_j)/2, a_j = Z_<j (X_j + iY_j)/2
    x_part = (bit, zmask)
    y_part = (bit, zmask | bit)
    # Z_<j Y_j as a stored string already contains the Y on j; Z_<j commutes with X_j/Y_j
    sign = -1j if dagger else 1j
    return PauliOperator({x_part: 0.5, y_part: 0.5 * sign}, n)


def jordan_wigner(op: FermionOperator) -> PauliOperator:
    """Map a fermionic operator to qubits, mode ``j`` onto qubit ``j``."""
    n = op.n_modes
    cache: dict = {}
    out = PauliOperator({}, n)
    acc: dict = {}
    for term, coeff in op.terms.items():
        prod = PauliOperator.identity(n, coeff)
        for mode, dag in term:
            key = (mode, dag)
            if key not in cache:
                cache[key] = _jw_ladder(mode, dag, n)
            prod = prod * cache[key]
        for k, v in prod.terms.items():
            acc[k] = acc.get(k, 0) + v
    out = PauliOperator(acc, n)
    return out


# --- tapering ------------------------------------------------------------------------


@dataclass(frozen=True)
class TaperingInfo:
    """Z-type symmetry generators, their sector and the Clifford used to remove them.

    ``generators`` are Z masks; ``clifford_rotations`` holds one ``(X_q, G)``
    label pair per generator, the rotation being ``(X_q + G)/sqrt(2)``.
    """

    n_qubits: int
    generators: tuple = ()
    removed_qubits: tuple = ()
    sector: tuple = ()
    clifford_rotations: tuple = field(default=(), compare=False)

    def generator_operators(self) -> list[PauliOperator]:
        return [PauliOperator({(0, g): 1.0}, self.n_qubits) for g in self.generators]

    @property
    def n_tapered(self) -> int:
        return self.n_qubits - len(self.removed_qubits)


def _gf2_nullspace(rows: list[int], n: int) -> list[int]:
    """Basis of {g : popcount(g & r) even for all rows r}, in reduced row-echelon form."""
    pivots: dict = {}  # pivot column -> row bits
    for r in rows:
        for col, prow in pivots.items():
            if (r >> col) & 1:
                r ^= prow
        if r == 0:
            continue
        col = (r & -r).bit_length() - 1
        for c2 in list(pivots):
            if (pivots[c2] >> col) & 1:
                pivots[c2] ^= r
        pivots[col] = r
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        g = 1 << f
        for col, prow in pivots.items():
            if (prow >> f) & 1:
                g |= 1 << col
        basis.append(g)
    return basis


def _rref(vectors: list[int], n: int) -> list[tuple[int, int]]:
    """Reduce generator set; returns (pivot qubit, vector) with each pivot unique to its vector.

    Pivots are taken from the highest qubit index down so removed qubits sit at
    the end of each symmetry block.
    """
    rows = list(vectors)
    out: list[tuple[int, int]] = []
    for col in reversed(range(n)):
        idx = next((i for i, r in enumerate(rows) if (r >> col) & 1), None)
        if idx is None:
            continue
        piv = rows.pop(idx)
        rows = [r ^ piv if (r >> col) & 1 else r for r in rows]
        out = [(c, v ^ piv if (v >> col) & 1 else v) for c, v in out]
        out.append((col, piv))
    return sorted(out)


def find_z2_symmetries(h: PauliOperator) -> TaperingInfo:
    """Independent Z-string symmetries of ``h`` and one removable qubit per generator."""
    if not h.is_hermitian():
        raise ValueError("symmetry search needs a Hermitian operator")
    n = h.n_qubits
    rows = [x for (x, z) in h.terms if x]
    kernel = _gf2_nullspace(rows, n)
    if not kernel:
        return TaperingInfo(n_qubits=n)
    reduced = _rref(kernel, n)
    gens = tuple(v for _, v in reduced)
    removed = tuple(c for c, _ in reduced)
    rotations = tuple(
        (
            PauliOperator.single("X", q, n).label((1 << q, 0)),
            PauliOperator({(0, g): 1.0}, n).label((0, g)),
        )
        for q, g in zip(removed, gens)
    )
    return TaperingInfo(n_qubits=n, generators=gens, removed_qubits=removed, clifford_rotations=rotations)


def select_sector(info: TaperingInfo, reference_occupation: Sequence[int] | str) -> TaperingInfo:
    """Fix the sector to the generator eigenvalues of a computational basis state.

    ``reference_occupation`` is either a list of occupied qubits or a bitstring.
    """
    if isinstance(reference_occupation, str):
        occ_mask = sum(1 << j for j, ch in enumerate(reference_occupation) if ch == "1")
    else:
        occ_mask = sum(1 << int(j) for j in reference_occupation)
    sector = []
    for g in info.generators:
        if not isinstance(g, int):
            raise SectorAmbiguityError(f"generator {g!r} is not a Z string")
        sector.append(-1 if _popcount(g & occ_mask) % 2 else 1)
    return TaperingInfo(
        n_qubits=info.n_qubits,
        generators=info.generators,
        removed_qubits=info.removed_qubits,
        sector=tuple(sector),
        clifford_rotations=info.clifford_rotations,
    )


def clifford_unitary(info: TaperingInfo) -> PauliOperator:
    """The full tapering Clifford U = prod_i (X_{q_i} + G_i)/sqrt(2) (Hermitian, unitary)."""
    n = info.n_qubits
    u = PauliOperator.identity(n)
    for q, g in zip(info.removed_qubits, info.generators):
        u = u * PauliOperator({(1 << q, 0): 1 / math.sqrt(2), (0, g): 1 / math.sqrt(2)}, n)
    return u


def _rotate(op: PauliOperator, info: TaperingInfo) -> PauliOperator:
    out = op
    for q, g in zip(info.removed_qubits, info.generators):
        u = PauliOperator({(1 << q, 0): 1 / math.sqrt(2), (0, g): 1 / math.sqrt(2)}, op.n_qubits)
        out = u * out * u
    return out


def _drop_bits(v: int, removed: Sequence[int]) -> int:
    out, k = 0, 0
    for j in range(v.bit_length()):
        if j in removed:
            continue
        out |= ((v >> j) & 1) << k
        k += 1
    return out


def taper(op: PauliOperator, info: TaperingInfo) -> PauliOperator:
    """Project ``op`` onto the symmetry sector and drop the removed qubits."""
    if op.n_qubits != info.n_qubits:
        raise ValueError("operator and tapering info act on different qubit counts")
    if not info.generators:
        return PauliOperator(dict(op.terms), op.n_qubits)
    if len(info.sector) != len(info.generators):
        raise ValueError("select a sector before tapering")
    for (x, z), v in op.terms.items():
        for g in info.generators:
            if _popcount(x & g) % 2:
                raise SymmetryViolationError(
                    f"term {op.label((x, z))} ({v:.3g}) anticommutes with symmetry {op.label((0, g))}"
                )
    rotated = _rotate(op, info)
    removed = set(info.removed_qubits)
    out: dict = {}
    for (x, z), v in rotated.terms.items():
        for q, s in zip(info.removed_qubits, info.sector):
            if (z >> q) & 1:
                raise SymmetryViolationError(f"rotated term {rotated.label((x, z))} acts as Z/Y on qubit {q}")
            if (x >> q) & 1:
                v = v * s
        key = (_drop_bits(x, removed), _drop_bits(z, removed))
        out[key] = out.get(key, 0) + v
    return PauliOperator(out, info.n_tapered)


def _embed_indices(info: TaperingInfo) -> np.ndarray:
    """Full-register index of each tapered basis state with removed qubits set to 0."""
    kept = [j for j in range(info.n_qubits) if j not in info.removed_qubits]
    n_t = len(kept)
    idx = np.zeros(1 << n_t, dtype=np.int64)
    for k, q in enumerate(kept):
        idx |= ((np.arange(1 << n_t) >> k) & 1) << q
    return idx


def taper_vector(vec: np.ndarray, info: TaperingInfo) -> np.ndarray:
    """Map a full-register state in the sector to the tapered register."""
    if not info.generators:
        return np.asarray(vec, dtype=complex).copy()
    u = clifford_unitary(info).to_matrix()
    rotated = u @ np.asarray(vec, dtype=complex)
    # removed qubits sit in X eigenstates |+> (s=+1) or |-> (s=-1)
    idx = _embed_indices(info)
    out = np.zeros(len(idx), dtype=complex)
    n_rem = len(info.removed_qubits)
    for pattern in range(1 << n_rem):
        amp = 1.0
        offset = 0
        for b, (q, s) in enumerate(zip(info.removed_qubits, info.sector)):
            bit = (pattern >> b) & 1
            offset |= bit << q
            amp *= (s if bit else 1) / math.sqrt(2)
        out += amp * rotated[idx | offset]
    return out


def untaper_vector(vec: np.ndarray, info: TaperingInfo) -> np.ndarray:
    """Inverse of :func:`taper_vector` for states in the selected sector."""
    if not info.generators:
        return np.asarray(vec, dtype=complex).copy()
    idx = _embed_indices(info)
    full = np.zeros(1 << info.n_qubits, dtype=complex)
    n_rem = len(info.removed_qubits)
    for pattern in range(1 << n_rem):
        amp = 1.0
        offset = 0
        for b, (q, s) in enumerate(zip(info.removed_qubits, info.sector)):
            bit = (pattern >> b) & 1
            offset |= bit << q
            amp *= (s if bit else 1) / math.sqrt(2)
        full[idx | offset] += amp * np.asarray(vec)
    return clifford_unitary(info).to_matrix() @ full


def taper_bitstring(bitstring: str, info: TaperingInfo) -> str:
    """Tapered register bits of a computational-basis reference (removed qubits dropped)."""
    return "".join(ch for j, ch in enumerate(bitstring) if j not in info.removed_qubits)


def map_pool(pool, info: TaperingInfo | None = None, anti_hermitian: bool = True) -> list[tuple]:
    """``(label, qubit operator)`` for every pool generator.

    With ``anti_hermitian`` the UCC generator ``E - E^dag`` is mapped,
    otherwise ``E`` itself.  Tapering uses ``info`` when given.
    """
    out = []
    for label, e in zip(pool.labels, pool.generators):
        op = e - e.adjoint() if anti_hermitian else e
        q = jordan_wigner(op)
        if info is not None:
            q = taper(q, info)
        out.append((label, q))
    return out
