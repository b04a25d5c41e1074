"""Rotating spirals under forced mean curvature flow: steady states and evolution."""

__version__ = "0.1.0"
