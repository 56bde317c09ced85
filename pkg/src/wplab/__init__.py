"""Numerical laboratory for weak products and multipliers of diagonal CNP spaces."""

__version__ = "0.1.0"
