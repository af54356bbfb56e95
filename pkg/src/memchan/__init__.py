"""Quantum memory channels as unitary collision models."""

__version__ = "0.1.0"
