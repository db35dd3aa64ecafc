"""Simulation and verification tools for freely cooling granular gases."""

__version__ = "0.1.0"
