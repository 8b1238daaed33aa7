"""Numerical checks of upper Laplacian bounds on discrete metric-measure spaces."""

__version__ = "0.1.0"
