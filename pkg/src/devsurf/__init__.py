"""Developable surfaces from bicubic B-splines by thinning their Gauss images."""
from .surface import SurfaceModel, ControlGrid, bspline_surface, build_panel_grid
from .energies import EnergyWeights, EnergyProblem
from .solver import SolverConfig, optimize
from .paneling import PanelSpec, panelize
from .develop import develop

__version__ = "0.1.0"
