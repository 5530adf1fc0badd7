"""Continuation of steady states and periodic orbits of 1D PDE systems."""

__version__ = "0.1.0"
