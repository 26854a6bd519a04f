"""Subspace-expansion excited states, forces, couplings and surface hopping for small molecules."""

__version__ = "0.1.0"
