"""Numerical laboratory for the m-equivariant Chern-Simons-Schroedinger equation."""

from .grid import EquivariantField, RadialGrid, build_grid
from .soliton import SolitonSpec, soliton_profile

__all__ = ["EquivariantField", "RadialGrid", "SolitonSpec", "build_grid", "soliton_profile"]
