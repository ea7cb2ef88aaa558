"""Numerical toolkit for valuations on Lipschitz functions on spheres."""

__version__ = "0.1.0"
