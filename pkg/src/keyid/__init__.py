"""Numerical verification of the key identity relating the canonical and
hyperbolic metrics on modular orbisurfaces and products of two of them."""

__version__ = "0.1.0"
