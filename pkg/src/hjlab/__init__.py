"""Numerical laboratory for viscous Hamilton-Jacobi equations and their adjoints."""

__version__ = "0.1.0"
