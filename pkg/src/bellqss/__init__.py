"""Simulation and cryptanalysis of five-party secret sharing over Bell states."""

__version__ = "0.1.0"
