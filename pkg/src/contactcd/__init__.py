"""Curvature-dimension tools for contact Riemannian manifolds."""

__version__ = "0.1.0"
