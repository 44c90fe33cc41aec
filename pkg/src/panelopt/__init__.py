"""Vortex panel airfoil solver with Thwaites drag, batched pipeline execution and a genetic optimizer."""

__version__ = "0.1.0"

from .geometry import Airfoil, BsplineGenome, from_bspline, naca4, panels, read_dat, write_dat
from .panel_core import FlowCondition, FlowSolution, assemble, influence, lu_solve, solve, surface_quantities
from .viscous import thwaites_march, viscous_drag

__all__ = [
    "Airfoil",
    "BsplineGenome",
    "FlowCondition",
    "FlowSolution",
    "assemble",
    "from_bspline",
    "influence",
    "lu_solve",
    "naca4",
    "panels",
    "read_dat",
    "solve",
    "surface_quantities",
    "thwaites_march",
    "viscous_drag",
    "write_dat",
]
