"""FCIDUMP reading and writing (real orbitals, 8-fold symmetric two-electron integrals)."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .integrals import IntegralSet

_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^A-Za-z_=]*)")


class FCIDumpError(ValueError):
    """Malformed FCIDUMP content; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _parse_header(text: str, first_line: int) -> dict:
    body = text.strip()
    if not body.upper().startswith("&FCI"):
        raise FCIDumpError("header must start with &FCI", first_line)
    body = body[4:]
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    out = {}
    for key, value in _HEADER_KEY.findall(body):
        out[key.upper()] = value.strip().strip(",").strip()
    for key in ("NORB", "NELEC"):
        if key not in out:
            raise FCIDumpError(f"header lacks {key}", first_line)
    try:
        header = {"NORB": int(out["NORB"]), "NELEC": int(out["NELEC"]), "MS2": int(out.get("MS2", "0") or 0)}
    except ValueError as exc:
        raise FCIDumpError(f"bad header value ({exc})", first_line) from None
    if header["NORB"] < 1:
        raise FCIDumpError("NORB must be positive", first_line)
    return header


def _set_eri(eri: np.ndarray, i: int, j: int, k: int, l: int, value: float) -> None:
    # chemist (ij|kl) equals physicist <ik|jl>; fill all eight real-orbital images
    for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k), (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)):
        eri[a, c, b, d] = value


def parse_fcidump(text: str) -> IntegralSet:
    lines = text.splitlines()
    end = None
    for n, line in enumerate(lines):
        stripped = line.strip().upper()
        if stripped.startswith("&END") or stripped == "/" or stripped.endswith("&END") or stripped.endswith("/"):
            end = n
            break
    if end is None:
        raise FCIDumpError("header is not terminated by &END or /")
    header = _parse_header(" ".join(lines[: end + 1]), 1)
    n = header["NORB"]
    h = np.zeros((n, n))
    eri = np.zeros((n, n, n, n))
    e_nuc = 0.0
    for lineno, line in enumerate(lines[end + 1:], start=end + 2):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise FCIDumpError(f"expected 'value i j k l', got {line.strip()!r}", lineno)
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in fields[1:])
        except ValueError:
            raise FCIDumpError(f"unreadable record {line.strip()!r}", lineno) from None
        if min(i, j, k, l) < 0 or max(i, j, k, l) > n:
            raise FCIDumpError(f"orbital index outside 1..{n}", lineno)
        if i and j and k and l:
            _set_eri(eri, i - 1, j - 1, k - 1, l - 1, value)
        elif i and j and not k and not l:
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif not (i or j or k or l):
            e_nuc = value
        else:
            # orbital energies (i 0 0 0) carry no Hamiltonian information
            if not (i and not j and not k and not l):
                raise FCIDumpError(f"unsupported index pattern {i} {j} {k} {l}", lineno)
    return IntegralSet(h=h, eri=eri, e_nuc=e_nuc, n_electrons=header["NELEC"], ms2=header["MS2"])


def read_fcidump(path: str | Path) -> IntegralSet:
    return parse_fcidump(Path(path).read_text())


def format_fcidump(ints: IntegralSet, n_electrons: int | None = None, ms2: int | None = None, tol: float = 1e-14) -> str:
    """FCIDUMP text with the unique chemist-notation integrals above ``tol``."""
    n = ints.n_orb
    nelec = n_electrons if n_electrons is not None else ints.n_electrons
    spin = ms2 if ms2 is not None else ints.ms2
    if nelec is None:
        raise ValueError("number of electrons unknown; pass n_electrons")
    lines = [f" &FCI NORB={n},NELEC={nelec},MS2={spin or 0},", "  ORBSYM=" + "1," * n, "  ISYM=1,", " &END"]
    chem = ints.eri.transpose(0, 2, 1, 3)
    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                        continue
                    v = chem[i, j, k, l]
                    if abs(v) > tol:
                        lines.append(f"{v: .16e} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}")
    for i in range(n):
        for j in range(i + 1):
            if abs(ints.h[i, j]) > tol:
                lines.append(f"{ints.h[i, j]: .16e} {i + 1:4d} {j + 1:4d}    0    0")
    lines.append(f"{ints.e_nuc: .16e}    0    0    0    0")
    return "\n".join(lines) + "\n"


def write_fcidump(ints: IntegralSet, path: str | Path, n_electrons: int | None = None, ms2: int | None = None) -> None:
    Path(path).write_text(format_fcidump(ints, n_electrons, ms2))
