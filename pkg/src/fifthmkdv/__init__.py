"""Numerical lab for the fifth-order modified KdV equation."""

__version__ = "0.1.0"
