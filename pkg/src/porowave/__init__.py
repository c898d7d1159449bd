"""Finite volume waves in porous media and fluids on mapped quadrilateral grids."""

__version__ = "0.1.0"
