"""Paneling a reference surface with C0 grids of developable bicubic panels.

The plane offset ``d`` of a panel's Gauss-image plane selects its type when
the panel is rotational: 0 for a cylinder of revolution, ``sin(phi)`` for a
cone whose rulings meet the axis at angle ``phi`` and 1 for a plane.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .diffgeo import PointFrame, gaussian_curvature, unit_normal
from .energies import EnergyProblem, EnergyWeights, difference_operators
from .errors import DegenerateParameterizationError
from .initializers import axis_point, initialize_patches
from .sampling import group_by_panel, interior_lattice, panel_lattice
from .solver import SolverConfig, optimize
from .surface import build_panel_grid, bspline_surface, precompute_rows

PANEL_TYPES = ("free", "rotational", "cylinder", "cone", "plane")


@dataclass
class PanelSpec:
    """Requested panel type; ``angle`` (degrees) only for cones."""

    type: str = "free"
    angle: float = None

    def __post_init__(self):
        if self.type not in PANEL_TYPES:
            raise ValueError(f"unknown panel type {self.type!r}")
        if self.type == "cone":
            if self.angle is None or not (0.0 < self.angle < 90.0):
                raise ValueError(f"cone angle must lie in (0, 90) degrees, got {self.angle}")
        elif self.angle is not None:
            raise ValueError(f"panel type {self.type!r} takes no angle")

    @property
    def d_target(self):
        if self.type == "cylinder":
            return 0.0
        if self.type == "plane":
            return 1.0
        if self.type == "cone":
            return math.sin(math.radians(self.angle))
        return None

    @property
    def rotational(self):
        return self.type in ("rotational", "cylinder", "cone")

    @classmethod
    def parse(cls, text):
        """``cylinder``, ``plane``, ``free``, ``rotational`` or ``cone:<degrees>``."""
        text = text.strip().lower()
        if text.startswith("cone"):
            _, sep, angle = text.partition(":")
            if not sep:
                raise ValueError("cone spec needs an angle, e.g. cone:30")
            try:
                value = float(angle)
            except ValueError:
                raise ValueError(f"cone angle {angle!r} is not a number") from None
            return cls("cone", value)
        if text in ("free-developable", "developable"):
            text = "free"
        return cls(text)

    def __str__(self):
        return f"cone:{self.angle:g}" if self.type == "cone" else self.type


def apply_panel_spec(patches, specs):
    """Configure patches in place from ``specs`` (sequence or ``{panel index: spec}``)."""
    if isinstance(specs, dict):
        missing = [i for i in range(len(patches)) if i not in specs]
        if missing:
            raise ValueError(f"no panel spec for panels {missing}")
        specs = [specs[i] for i in range(len(patches))]
    if len(specs) != len(patches):
        raise ValueError(f"{len(specs)} panel specs for {len(patches)} panels")
    for patch, spec in zip(patches, specs):
        if isinstance(spec, str):
            spec = PanelSpec.parse(spec)
        target = spec.d_target
        patch.d_target = target
        patch.d_fixed = target is not None
        patch.rotational = spec.rotational
        if patch.d_fixed:
            patch.plane_d = target
    return patches


def pca_frame(points):
    """Centroid and principal axes (rows, by decreasing variance)."""
    center = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - center, full_matrices=False)
    axes = vt.copy()
    if np.linalg.det(axes) < 0:
        axes[2] *= -1
    return center, axes


def projection_params(points, center, axes):
    local = (points - center) @ axes[:2].T
    lo, hi = local.min(axis=0), local.max(axis=0)
    return np.clip((local - lo) / np.maximum(hi - lo, 1e-300), 0.0, 1.0)


def least_squares_fit(model, params, targets, smoothing=1e-6):
    """Control points minimizing ``|S(params) - targets|^2`` plus light fairness."""
    A = precompute_rows(model, params, quantities=("value",)).matrix("value")
    _, D2 = difference_operators(model.control.shape)
    scale = A.shape[0] / max(model.n_ctrl, 1)
    M = (A.T @ A + smoothing * scale * (D2.T @ D2)).tocsc()
    rhs = A.T @ targets
    lu = spla.splu(M)
    points = np.column_stack([lu.solve(np.ascontiguousarray(rhs[:, c])) for c in range(3)])
    return model.copy(points)


def seed_from_reference(reference, rows=None, cols=None, ctrl=None):
    """Initial surface fitted to the reference over its best-fit-plane projection.

    Give ``rows, cols`` for a panel grid or ``ctrl=(nu, nv)`` for a single
    B-spline.  The longer principal extent maps to the u direction.
    """
    center, axes = pca_frame(reference.points)
    params = projection_params(reference.points, center, axes)
    if ctrl is not None:
        nu, nv = ctrl
        model = bspline_surface(_plane_grid(nu, nv, reference, center, axes))
    else:
        nu, nv = 3 * rows + 1, 3 * cols + 1
        model = build_panel_grid(rows, cols, _plane_grid(nu, nv, reference, center, axes))
    return least_squares_fit(model, params, reference.points)


def _plane_grid(nu, nv, reference, center, axes):
    local = (reference.points - center) @ axes[:2].T
    lo, hi = local.min(axis=0), local.max(axis=0)
    a, b = np.meshgrid(np.linspace(lo[0], hi[0], nu), np.linspace(lo[1], hi[1], nv),
                       indexing="ij")
    return center + a[..., None] * axes[0] + b[..., None] * axes[1]


def closeness_params(model, per_panel=(10, 10), grid=(30, 30)):
    if model.kind == "panel-grid":
        return panel_lattice(model, per_panel)
    uu, vv = np.meshgrid(interior_lattice(0, 1, grid[0]), interior_lattice(0, 1, grid[1]),
                         indexing="ij")
    return np.column_stack([uu.ravel(), vv.ravel()])


@dataclass
class FitResult:
    model: object
    solve: object
    rms: float


def fit_to_reference(model, reference, fit_weights=None, iterations=10, close_params=None,
                     solver_config=None):
    """TDM fit of ``model`` to ``reference`` using closeness and fairness only."""
    w = fit_weights or EnergyWeights(w_d=0.0, w_c=1.0, w_f=1e-3, w_p=1e-2)
    weights = EnergyWeights(w_d=0.0, w_r=0.0, w_c=w.w_c, w_f=w.w_f, w_f1=w.w_f1, w_f2=w.w_f2,
                            w_p=w.w_p)
    if close_params is None:
        close_params = closeness_params(model)
    problem = EnergyProblem(model, [], np.zeros((0, 2)), weights, reference, close_params)
    config = solver_config or SolverConfig(max_iterations=iterations)
    if solver_config is not None:
        config = SolverConfig(**{**vars(solver_config), "max_iterations": iterations})
    result = optimize(problem, config)
    fitted = model.copy(result.state.points)
    e_c = result.history[-1].E_c
    return FitResult(fitted, result, math.sqrt(e_c / len(close_params)))


@dataclass
class PanelReport:
    panel: int
    spec: str
    v: np.ndarray
    d: float
    axis_point: np.ndarray
    axis_direction: np.ndarray
    max_plane_distance: float
    max_coplanarity: float
    max_abs_K: float


@dataclass
class PanelizeResult:
    model: object
    history: list
    report: list
    problem: object = field(repr=False, default=None)
    state: object = field(repr=False, default=None)
    fit: object = field(repr=False, default=None)


def panel_report(problem, state, specs=None, probe=(8, 8)):
    """Per-panel plane, axis and residual diagnostics at ``state``."""
    model = problem.model_at(state)
    frames = problem.dev_rows.evaluate(state.points)
    normals = unit_normal(frames[1], frames[2])
    out = []
    for i, patch in enumerate(problem.patches):
        ids = patch.sample_ids
        v, d = state.v[i], float(state.d[i])
        plane = np.abs(normals[ids] @ v + d)
        if patch.rotational:
            nbar = np.cross(frames[0][ids], normals[ids])
            cop = np.abs(nbar @ v + normals[ids] @ state.moment[i])
            point = axis_point(v, state.moment[i])
        else:
            cop = np.full(len(ids), np.nan)
            point = np.full(3, np.nan)
        max_k = np.nan
        if patch.panel is not None:
            (u0, u1), (v0, v1) = model.panel_bounds(*patch.panel)
            uu, vv = np.meshgrid(interior_lattice(u0, u1, probe[0]),
                                 interior_lattice(v0, v1, probe[1]), indexing="ij")
            pf = precompute_rows(model, np.column_stack([uu.ravel(), vv.ravel()]))
            try:
                K = gaussian_curvature(PointFrame.from_quantities(pf.evaluate(state.points)))
                max_k = float(np.max(np.abs(K)))
            except DegenerateParameterizationError:
                pass
        spec = str(specs[i]) if specs is not None else ""
        out.append(PanelReport(i, spec, v.copy(), d, point, v / np.linalg.norm(v),
                               float(plane.max()), float(np.nanmax(cop)) if patch.rotational
                               else float("nan"), max_k))
    return out


def panelize(reference, rows, cols, specs, weights, solver_config=None, per_panel_L=(4, 4),
             close_L=(10, 10), fit_iterations=10, fit_weights=None, moment_mode="variable",
             seed_model=None):
    """Fit a ``rows x cols`` panel grid to ``reference`` and optimize it toward ``specs``."""
    if isinstance(specs, dict):
        specs = [specs[i] for i in range(rows * cols)]
    specs = [PanelSpec.parse(s) if isinstance(s, str) else s for s in specs]
    if len(specs) != rows * cols:
        raise ValueError(f"{len(specs)} panel specs for a {rows}x{cols} grid")
    model = seed_model if seed_model is not None else seed_from_reference(reference, rows, cols)
    close_params = panel_lattice(model, close_L)
    fit = None
    if fit_iterations:
        # the fit keeps its own light fairness: a one-sided closeness term lets a
        # strongly faired net shrink onto a curve inside the reference
        fit = fit_to_reference(model, reference, fit_weights, fit_iterations, close_params)
        model = fit.model
    params, patches = group_by_panel(model, per_panel_L)
    apply_panel_spec(patches, specs)
    initialize_patches(model, params, patches)
    problem = EnergyProblem(model, patches, params, weights, reference, close_params,
                            moment_mode=moment_mode)
    result = optimize(problem, solver_config)
    final = model.copy(result.state.points)
    report = panel_report(problem, result.state, specs)
    return PanelizeResult(final, result.history, report, problem, result.state, fit)
