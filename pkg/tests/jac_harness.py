"""Finite-difference checks of every residual block's analytic Jacobian."""
import numpy as np

from devsurf.energies import (Context, EnergyProblem, EnergyWeights, residuals_closeness,
                              residuals_developability, residuals_fairness,
                              residuals_rotationality)
from devsurf.initializers import initialize_patches
from devsurf.paneling import apply_panel_spec
from devsurf.reference import ReferenceCloud
from devsurf.sampling import group_by_panel
from devsurf.surface import build_panel_grid

KINDS = ("developability", "unit-length", "rotationality", "pluecker", "closeness",
         "point-distance", "fairness1", "fairness2")


def random_problem(seed, normal_jacobian="lagged"):
    """A 2x2 panel grid with mixed free and rotational panels, perturbed planes."""
    rng = np.random.default_rng(seed)
    g = np.linspace(0, 1, 7)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([uu, vv, 0.3 * np.sin(2 * uu) + 0.2 * vv ** 2], -1)
    pts += 0.02 * rng.normal(size=pts.shape)
    model = build_panel_grid(2, 2, pts)
    params, patches = group_by_panel(model, (3, 3))
    apply_panel_spec(patches, ["free", "rotational", "cone:40", "cylinder"])
    initialize_patches(model, params, patches)
    for p in patches:
        p.plane_v = p.plane_v + 0.1 * rng.normal(size=3)
        if not p.d_fixed:
            p.plane_d += 0.1 * rng.normal()
        if p.rotational:
            p.axis_moment = p.axis_moment + 0.1 * rng.normal(size=3)
    ref_pts = rng.normal(size=(80, 3)) * [0.6, 0.6, 0.2] + [0.5, 0.5, 0.2]
    ref = ReferenceCloud(ref_pts, rng.normal(size=(80, 3)))
    weights = EnergyWeights(w_d=1, w_r=1, w_c=1, w_f=1, w_f1=1, w_f2=1, w_p=0.5, lambda1=0.7,
                            lambda2=1.3)
    return EnergyProblem(model, patches, params, weights, ref, normal_jacobian=normal_jacobian)


def block_values(problem, x, state0, ctx, refresh_norm):
    """Residual values of every block at packed variables ``x``."""
    state = problem.layout.unpack(x, state0)
    if refresh_norm:
        frames = problem.frames(state)
        ctx = Context(np.linalg.norm(np.cross(frames[1], frames[2]), axis=1),
                      ctx.closest_points, ctx.closest_normals)
    return {b.kind: b.values for b in problem.blocks(state, ctx, jacobian=False)}


def jacobian_errors(problem, h=1e-3, floor=1e-12, relative_floor=0.0, levels=2):
    """Max relative error per block between analytic and central-difference Jacobians.

    Lagged mode is checked with the normalization frozen; projected mode
    against the exactly normalized residuals, which it linearizes.  Central
    differences at ``h, h/2, ...`` (``levels`` of them) are Richardson
    extrapolated.  Entries below ``floor`` (absolute) or ``relative_floor``
    times the block's largest entry are skipped.
    """
    state0 = problem.initial_state()
    ctx = problem.context(state0)
    refresh = problem.projected
    x0 = problem.layout.pack(state0)
    analytic = {b.kind: b.jacobian(problem.layout.size).toarray()
                for b in problem.blocks(state0, ctx, jacobian=True)}
    fd = {k: np.zeros_like(J) for k, J in analytic.items()}
    for i in range(len(x0)):
        cols = []
        for level in range(levels):
            step = h / 2 ** level
            e = np.zeros_like(x0)
            e[i] = step
            plus = block_values(problem, x0 + e, state0, ctx, refresh)
            minus = block_values(problem, x0 - e, state0, ctx, refresh)
            cols.append({k: (plus[k] - minus[k]) / (2 * step) for k in fd})
        # Richardson table over halved steps cancels the h^2, h^4, ... terms
        for m in range(1, levels):
            factor = 4.0 ** m
            cols = [{k: (factor * b[k] - a[k]) / (factor - 1) for k in fd}
                    for a, b in zip(cols, cols[1:])]
        for k in fd:
            fd[k][:, i] = cols[0][k]
    out = {}
    for k in analytic:
        A, F = analytic[k], fd[k]
        mask = np.maximum(np.abs(A), np.abs(F)) >= max(floor, relative_floor * np.abs(A).max())
        if not mask.any():
            out[k] = 0.0
            continue
        # absolute FD noise is eps * |r| / h; entries far below it cannot be resolved
        scale = np.maximum(np.abs(F), np.abs(A))
        out[k] = float(np.max(np.abs(A - F)[mask] / scale[mask]))
    return out
