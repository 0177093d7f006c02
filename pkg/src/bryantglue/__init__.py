"""Numerical gluing of CMC-1 surfaces in hyperbolic 3-space from tangent horospheres."""

__version__ = "0.1.0"
