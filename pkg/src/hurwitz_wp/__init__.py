"""Branched covers of the sphere, their deformation theory and Weil-Petersson curvature."""

__version__ = "0.1.0"
