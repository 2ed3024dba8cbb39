"""Optimal control of a smoothed phase-field system with dynamic boundary conditions."""

__version__ = "0.1.0"
