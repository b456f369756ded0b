"""Numerical verification of sharp first-eigenvalue upper bounds for hypersurfaces."""

__version__ = "0.1.0"
