"""Gauss-image thinning of a whole surface with overlapping patches."""
from dataclasses import dataclass, field

from .energies import EnergyProblem
from .initializers import initialize_patches
from .paneling import closeness_params
from .sampling import group_overlapping, make_grid
from .solver import optimize


@dataclass
class DevelopResult:
    model: object
    history: list
    problem: object = field(repr=False)
    state: object = field(repr=False)
    converged: bool = False


def setup_developability(model, weights, samples=(30, 60), patch=(5, 5), overlap=(2, 2),
                         reference=None, close_params=None, fixed_mask=None):
    """Sample, group into overlapping patches and initialize their planes."""
    grid = make_grid(*samples)
    patches = group_overlapping(grid, patch[0], patch[1], overlap[0], overlap[1])
    initialize_patches(model, grid.params, patches)
    if reference is not None and close_params is None:
        close_params = closeness_params(model)
    return EnergyProblem(model, patches, grid.params, weights, reference, close_params,
                         fixed_mask=fixed_mask)


def develop(model, weights, solver_config=None, **setup):
    problem = setup_developability(model, weights, **setup)
    result = optimize(problem, solver_config)
    return DevelopResult(model.copy(result.state.points), result.history, problem,
                         result.state, result.converged)
