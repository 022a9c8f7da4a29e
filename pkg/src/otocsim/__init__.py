"""Randomized-measurement OTOC simulation for a kicked Ising chain."""

__version__ = "0.1.0"
