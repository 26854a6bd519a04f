"""Physical constants and unit conversions (CODATA 2018)."""

BOHR_IN_ANGSTROM = 0.529177210903
ANGSTROM_TO_BOHR = 1.0 / BOHR_IN_ANGSTROM
AMU_IN_ELECTRON_MASS = 1822.888486209
HYDROGEN_MASS_AMU = 1.00782503223
HARTREE_IN_EV = 27.211386245988
ATOMIC_TIME_IN_FS = 2.4188843265857e-2

ATOMIC_NUMBERS = {"H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9}

# STO-3G hydrogen 1s contraction, zeta = 1.24.
# Hehre, Stewart, Pople, J. Chem. Phys. 51, 2657 (1969); values as distributed by the
# Basis Set Exchange.
STO3G_H_EXPONENTS = (3.42525091, 0.62391373, 0.16885540)
STO3G_H_COEFFICIENTS = (0.15432897, 0.53532814, 0.44463454)
