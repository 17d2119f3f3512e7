"""Stability certification for the L2-projection on graded bisection meshes."""

__version__ = "0.1.0"
