"""Simulation and bound-checking tools for MW-alpha scheduling in switched networks."""

__version__ = "0.1.0"
