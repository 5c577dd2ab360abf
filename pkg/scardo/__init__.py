"""Simulation and mean-field analysis of the heterogeneity-augmented SCARDO model."""

__version__ = "0.1.0"
