"""Scattering invariants for regression of molecular energies."""

__version__ = "0.1.0"
