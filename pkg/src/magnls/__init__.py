"""Numerical workbench for semiclassical magnetic nonlinear Schrodinger equations."""

__version__ = "0.1.0"
