"""Quantum state tomography with variational circuits and an MPS reconstruction step."""

__version__ = "0.1.0"
