"""Exact diagonalization toolkit for propagation bounds of lattice bosons."""

__version__ = "0.1.0"
