"""Desk-scale simulation toolkit for frustrated Ising chains in capacitively
coupled Josephson junction arrays."""

__version__ = "0.1.0"
