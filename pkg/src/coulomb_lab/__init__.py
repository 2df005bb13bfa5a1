"""Numerical laboratory for the one-component Coulomb gas."""

__version__ = "0.1.0"
