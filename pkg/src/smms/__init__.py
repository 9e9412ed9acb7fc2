"""Smooth metric measure spaces: weighted curvature, quasi-Einstein models and energies."""

__version__ = "0.1.0"
