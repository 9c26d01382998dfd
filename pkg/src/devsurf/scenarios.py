"""Synthetic surfaces and reference clouds used by the bundled runs and tests."""
import math
from dataclasses import dataclass

import numpy as np

from .paneling import least_squares_fit
from .reference import ReferenceCloud
from .sampling import make_grid
from .surface import (ControlGrid, SurfaceModel, build_panel_grid, bspline_surface,
                      panel_knots, precompute_rows)
from .diffgeo import unit_normal


def fit_parametric(model, func, dense=(40, 40)):
    """Least-squares B-spline approximation of ``func(u, v) -> (K, 3)``."""
    grid = make_grid(*dense)
    return least_squares_fit(model, grid.params, func(grid.params[:, 0], grid.params[:, 1]),
                             smoothing=0.0)


def surface_cloud(model, counts=(40, 40)):
    """Reference cloud of positions and exact normals sampled from ``model``."""
    grid = make_grid(*counts)
    q = precompute_rows(model, grid.params).evaluate(model.flat_points())
    return ReferenceCloud(q[0], unit_normal(q[1], q[2]), source="surface samples")


def cylinder(radius=1.0, angle=math.pi / 2, length=2.0):
    """Parametric cylinder sector around the z axis."""
    def f(u, v):
        t = angle * (u - 0.5)
        return np.column_stack([radius * np.cos(t), radius * np.sin(t), length * (v - 0.5)])
    return f


def cylinder_normals(radius, angle):
    def n(u, v):
        t = angle * (u - 0.5)
        return np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    return n


def torus(R=3.0, r=1.0, u_range=(-0.6, 0.6), v_range=(-0.9, 0.9)):
    """Torus patch; u runs along the big circle, v along the small one."""
    def f(u, v):
        a = u_range[0] + (u_range[1] - u_range[0]) * u
        b = v_range[0] + (v_range[1] - v_range[0]) * v
        rad = R + r * np.cos(b)
        return np.column_stack([rad * np.cos(a), rad * np.sin(a), r * np.sin(b)])
    return f


def torus_normals(u_range=(-0.6, 0.6), v_range=(-0.9, 0.9)):
    def n(u, v):
        a = u_range[0] + (u_range[1] - u_range[0]) * u
        b = v_range[0] + (v_range[1] - v_range[0]) * v
        return np.column_stack([np.cos(b) * np.cos(a), np.cos(b) * np.sin(a), np.sin(b)])
    return n


def cone(half_angle_deg=30.0, sweep=math.radians(40), s_range=(1.0, 2.0), apex=(0, 0, 0),
         axis_rotation=None):
    """Cone of revolution about z; ``s`` is the distance from the apex along a ruling."""
    phi = math.radians(half_angle_deg)
    apex = np.asarray(apex, dtype=float)
    rot = np.eye(3) if axis_rotation is None else np.asarray(axis_rotation)

    def f(u, v):
        t = sweep * (u - 0.5)
        s = s_range[0] + (s_range[1] - s_range[0]) * v
        pts = np.column_stack([s * math.sin(phi) * np.cos(t), s * math.sin(phi) * np.sin(t),
                               s * math.cos(phi)])
        return apex + pts @ rot.T
    return f


def cone_normals(half_angle_deg=30.0, sweep=math.radians(40), axis_rotation=None):
    phi = math.radians(half_angle_deg)
    rot = np.eye(3) if axis_rotation is None else np.asarray(axis_rotation)

    def n(u, v):
        t = sweep * (u - 0.5)
        out = np.column_stack([math.cos(phi) * np.cos(t), math.cos(phi) * np.sin(t),
                               -math.sin(phi) * np.ones_like(t)])
        return out @ rot.T
    return n


def analytic_cloud(func, normals, counts=(40, 40)):
    grid = make_grid(*counts)
    u, v = grid.params[:, 0], grid.params[:, 1]
    return ReferenceCloud(func(u, v), normals(u, v), source="analytic")


@dataclass
class Scenario:
    name: str
    model: object
    reference: ReferenceCloud
    truth: dict


def greville(knots):
    """Greville abscissae of a cubic knot vector."""
    knots = np.asarray(knots)
    return (knots[1:-3] + knots[2:-2] + knots[3:-1]) / 3.0


def smooth_field(u, v, rng, modes=2):
    """Random combination of low-frequency cosines, scaled to max |f| = 1."""
    field = np.zeros(np.broadcast(u, v).shape)
    for a in range(modes + 1):
        for b in range(modes + 1):
            if a == b == 0:
                continue
            field = field + rng.normal() * np.cos(a * np.pi * u) * np.cos(b * np.pi * v)
    return field / np.max(np.abs(field))


def perturbed_cylinder(radius=0.5, angle=math.pi / 2, length=1.0, ctrl=(7, 7),
                       amplitude=0.01, seed=0):
    """Cylinder-sector B-spline with a smooth radial bump field of ``amplitude * radius``.

    The offsets are a low-frequency field evaluated at the Greville
    abscissae, so the surface stays close to a cylinder while losing its
    developability.  The closeness reference is the perturbed surface.
    """
    base = fit_parametric(bspline_surface(np.zeros(ctrl + (3,))), cylinder(radius, angle, length))
    rng = np.random.default_rng(seed)
    gu, gv = np.meshgrid(greville(base.knots_u), greville(base.knots_v), indexing="ij")
    offset = amplitude * radius * smooth_field(gu, gv, rng)
    pts = base.points.copy()
    radial = pts.copy()
    radial[..., 2] = 0.0
    radial /= np.linalg.norm(radial, axis=-1, keepdims=True)
    pts += offset[..., None] * radial
    model = base.copy(pts)
    return Scenario("perturbed-cylinder", model, surface_cloud(model, (40, 40)),
                    {"axis": np.array([0.0, 0.0, 1.0]), "radius": radius, "base": base})


def corner_mask(shape):
    """Boolean mask over flat control indices selecting the four corner points."""
    mask = np.zeros(shape, bool)
    mask[[0, 0, -1, -1], [0, -1, 0, -1]] = True
    return mask.ravel()


def doubly_curved_panel(curvature=(0.4, 0.2), size=1.0):
    """Single bicubic Bezier panel over ``z = a x^2 + b y^2``.

    Its corner control points are meant to stay fixed (``truth["fixed_mask"]``):
    closeness only pulls surface samples toward the reference, so an
    unpinned panel can shrink onto a small, nearly flat part of it.
    """
    a, b = curvature

    def f(u, v):
        x, y = size * (u - 0.5), size * (v - 0.5)
        return np.column_stack([x, y, a * x ** 2 + b * y ** 2])

    model = fit_parametric(build_panel_grid(1, 1), f)
    return Scenario("doubly-curved", model, surface_cloud(model, (30, 30)),
                    {"fixed_mask": corner_mask(model.control.shape), "func": f})


def torus_sector(R=3.0, r=1.0, u_range=(-0.6, 0.6), v_range=(-0.9, 0.9), counts=(60, 40)):
    """Cloud sampled from the outer (positively curved) part of a torus."""
    f = torus(R, r, u_range, v_range)
    n = torus_normals(u_range, v_range)
    return Scenario("torus-sector", None, analytic_cloud(f, n, counts),
                    {"R": R, "r": r, "func": f, "normals": n})


def rational_arc(sweep):
    """Cubic rational Bezier control points (2D) and weights of a unit circle arc.

    The arc is symmetric about the x axis; the exact quadratic form is
    degree-elevated so it fits a bicubic panel.
    """
    h = sweep / 2
    quad = np.array([[math.cos(h), -math.sin(h)], [1.0 / math.cos(h), 0.0],
                     [math.cos(h), math.sin(h)]])
    w = np.array([1.0, math.cos(h), 1.0])
    hom = np.column_stack([quad * w[:, None], w])
    cubic = np.array([hom[0], (hom[0] + 2 * hom[1]) / 3, (2 * hom[1] + hom[2]) / 3, hom[2]])
    return cubic[:, :2] / cubic[:, 2:], cubic[:, 2]


def cone_sector(half_angle_deg=30.0, sweep=math.radians(40), s_range=(1.0, 2.0),
                apex=(0.3, -0.2, 0.5), tilt_deg=20.0):
    """Exact rational bicubic panel on a tilted, translated cone of revolution.

    ``half_angle_deg`` is the angle between rulings and axis; u runs along
    the circular sections and v along the rulings.
    """
    phi = math.radians(half_angle_deg)
    c, s = math.cos(math.radians(tilt_deg)), math.sin(math.radians(tilt_deg))
    rot = np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])
    apex = np.asarray(apex, float)
    arc, w = rational_arc(sweep)
    dirs = np.column_stack([math.sin(phi) * arc, np.full(4, math.cos(phi))]) @ rot.T
    dist = np.linspace(s_range[0], s_range[1], 4)
    pts = apex + dist[None, :, None] * dirs[:, None, :]
    weights = np.repeat(w[:, None], 4, axis=1)
    model = SurfaceModel(ControlGrid(pts), panel_knots(1), panel_knots(1), "panel-grid",
                         weights, (1, 1))
    f = cone(half_angle_deg, sweep, s_range, apex, rot)
    n = cone_normals(half_angle_deg, sweep, rot)
    axis = rot @ np.array([0.0, 0.0, 1.0])
    return Scenario("cone", model, surface_cloud(model, (40, 40)),
                    {"axis": axis, "apex": apex, "moment": np.cross(apex, axis),
                     "d": math.sin(phi), "func": f, "normals": n})


SCENARIOS = {
    "perturbed-cylinder": perturbed_cylinder,
    "doubly-curved": doubly_curved_panel,
    "torus-sector": torus_sector,
    "cone": cone_sector,
}
