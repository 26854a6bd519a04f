from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsedyn.fcidump import FCIDumpError, format_fcidump, parse_fcidump, read_fcidump, write_fcidump
from qsedyn.integrals import IntegralSet, MolecularGeometry, molecular_integrals
from qsedyn.operators import build_hamiltonian

DATA = Path(__file__).parent / "data"
# PySCF FCI for the same file (H2, 0.735 A, STO-3G)
PYSCF_H2_FCI = -1.1373060357534


def sector_ground(ints, n_particles):
    mat = build_hamiltonian(ints).to_fock_matrix()
    idx = [i for i in range(mat.shape[0]) if bin(i).count("1") == n_particles]
    return np.linalg.eigvalsh(mat[np.ix_(idx, idx)])[0]


def random_integrals(seed, n):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, n))
    h = h + h.T
    a = rng.normal(size=(n * n, n * n))
    chem = (a + a.T).reshape(n, n, n, n)
    chem = chem + chem.transpose(1, 0, 2, 3)
    chem = chem + chem.transpose(0, 1, 3, 2)
    return IntegralSet(h=h, eri=chem.transpose(0, 2, 1, 3), e_nuc=float(rng.normal()), n_electrons=2, ms2=0)


def test_pyscf_file_gives_the_pyscf_energy():
    ints = read_fcidump(DATA / "h2_pyscf.fcidump")
    assert ints.n_orb == 2 and ints.n_electrons == 2 and ints.ms2 == 0
    assert sector_ground(ints, 2) == pytest.approx(PYSCF_H2_FCI, abs=1e-10)


def test_pyscf_file_agrees_with_built_in_engine():
    ints, _ = molecular_integrals(MolecularGeometry((("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 0.735)))))
    ext = read_fcidump(DATA / "h2_pyscf.fcidump")
    assert sector_ground(ints, 2) == pytest.approx(sector_ground(ext, 2), abs=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_round_trip(seed, n):
    ints = random_integrals(seed, n)
    back = parse_fcidump(format_fcidump(ints))
    assert np.allclose(back.h, ints.h, atol=1e-14)
    assert np.allclose(back.eri, ints.eri, atol=1e-14)
    assert back.e_nuc == ints.e_nuc


def test_write_and_read(point_08, tmp_path):
    path = tmp_path / "h3.fcidump"
    write_fcidump(point_08.integrals, path, n_electrons=3, ms2=1)
    back = read_fcidump(path)
    assert back.n_electrons == 3 and back.ms2 == 1
    assert np.abs(back.eri - point_08.integrals.eri).max() < 1e-15
    assert sector_ground(back, 3) <= point_08.oracle_energies[0] + 1e-10


def test_orbital_energy_records_are_ignored():
    text = (DATA / "h2_pyscf.fcidump").read_text().rstrip("\n").splitlines()
    text.insert(-1, " -0.5 1 0 0 0")
    assert np.allclose(parse_fcidump("\n".join(text)).h, read_fcidump(DATA / "h2_pyscf.fcidump").h)


def test_fortran_exponents_and_slash_terminator():
    text = " &FCI NORB=1, NELEC=1, MS2=1\n /\n 0.5D+00 1 1 1 1\n -1.0D0 1 1 0 0\n 0.0 0 0 0 0\n"
    ints = parse_fcidump(text)
    assert ints.eri[0, 0, 0, 0] == 0.5 and ints.h[0, 0] == -1.0


@pytest.mark.parametrize(
    "text, line",
    [
        (" NORB=2, NELEC=2\n &END\n", 1),
        (" &FCI NELEC=2\n &END\n", 1),
        (" &FCI NORB=2, NELEC=2\n", None),
        (" &FCI NORB=2, NELEC=2\n &END\n 0.1 1 1 1\n", 3),
        (" &FCI NORB=2, NELEC=2\n &END\n 0.1 1 3 1 1\n", 3),
        (" &FCI NORB=2, NELEC=2\n &END\n x 1 1 1 1\n", 3),
        (" &FCI NORB=2, NELEC=2\n &END\n 0.1 1 0 1 0\n", 3),
    ],
)
def test_malformed_files_report_the_line(text, line):
    with pytest.raises(FCIDumpError) as exc:
        parse_fcidump(text)
    assert exc.value.line == line


def test_writing_requires_an_electron_count():
    ints = IntegralSet(h=np.zeros((1, 1)), eri=np.zeros((1, 1, 1, 1)), e_nuc=0.0)
    with pytest.raises(ValueError):
        format_fcidump(ints)
