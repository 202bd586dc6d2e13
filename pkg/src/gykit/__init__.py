"""Numerics for the Geman-Yor operator x^2 d_xx + x d_x + x d_y - d_t."""
from ._backend import BACKEND
from .group import GPoint

__version__ = "0.1.0"

__all__ = ["BACKEND", "GPoint", "__version__"]
