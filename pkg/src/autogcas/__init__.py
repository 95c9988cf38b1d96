"""Nuisance-free automatic ground collision avoidance: simulation, safety filters and evaluation."""

__version__ = "0.1.0"
