"""Numerical laboratory for grafting hyperbolic surfaces along flat cylinders."""

__version__ = "0.1.0"
