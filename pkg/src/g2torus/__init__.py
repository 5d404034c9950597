"""Numerical geometry of closed G2 structures on torus fibrations."""

__version__ = "0.1.0"
