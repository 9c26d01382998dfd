"""Initial target planes and rotation-axis moments per patch."""
from dataclasses import dataclass

import numpy as np

from .diffgeo import PointFrame, principal
from .errors import InitializationError
from .surface import precompute_rows


@dataclass
class PlaneFit:
    v: np.ndarray
    d: float
    ambiguous: bool = False


@dataclass
class AxisFit:
    moment: np.ndarray
    degenerate: bool = False


def canonical_sign(v):
    """Flip ``v`` so its largest-magnitude component is positive."""
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def direction_matrix(directions, weights):
    q = np.asarray(directions, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).reshape(-1)
    return (q * w[:, None]).T @ q


def init_plane(directions, weights, normals, d_target=None):
    """Plane ``v . x + d = 0`` as orthogonal as possible to the weighted directions.

    ``v`` is the smallest eigenvector of ``sum w_k q_k q_k^T`` and the plane
    passes through the barycenter of ``normals``.  With ``d_target`` the
    sign of ``v`` is chosen to agree with it and ``d = d_target``.
    """
    q = np.asarray(directions, dtype=float).reshape(-1, 3)
    w = np.asarray(weights, dtype=float).reshape(-1)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    if len(q) == 0 or len(normals) == 0 or len(q) != len(w):
        raise InitializationError("plane initialization needs nonempty, matching inputs")
    if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(q)):
        raise InitializationError("weights must lie in [0, 1] and directions be finite")
    evals, evecs = np.linalg.eigh(direction_matrix(q, w))
    ambiguous = bool(evals[1] - evals[0] <= 1e-12 * max(1.0, abs(evals[2])))
    v = canonical_sign(evecs[:, 0])
    bary = normals.mean(axis=0)
    d = -float(v @ bary)
    if d_target is not None:
        if d_target != 0 and np.sign(d) != np.sign(d_target) and d != 0:
            v = -v
        d = float(d_target)
    return PlaneFit(v, d, ambiguous)


def orthonormal_complement(v):
    """Orthonormal ``(b1, b2)`` spanning the plane perpendicular to ``v``."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    seed = np.zeros(3)
    seed[np.argmin(np.abs(v))] = 1.0
    b1 = seed - (seed @ v) * v
    b1 /= np.linalg.norm(b1)
    return b1, np.cross(v, b1)


def line_moments(points, normals):
    """Plucker moments ``p x n`` of the normal lines."""
    return np.cross(points, normals)


def init_axis_moment(points, normals, v, tol=1e-12):
    """Least-squares moment of an axis with direction ``v`` meeting all normal lines.

    Minimizes ``sum (v . nbar_k + vbar . n_k)^2`` over ``vbar = mu1 b1 + mu2 b2``.
    """
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(normals) < 2:
        raise InitializationError("axis fit needs at least two normal lines")
    b1, b2 = orthonormal_complement(v)
    A = np.column_stack([normals @ b1, normals @ b2])
    rhs = -line_moments(points, normals) @ np.asarray(v, dtype=float)
    ata = A.T @ A
    scale = max(np.trace(ata), 1e-300)
    if np.linalg.det(ata) <= tol * scale * scale:
        return AxisFit(np.zeros(3), True)
    mu = np.linalg.solve(ata, A.T @ rhs)
    return AxisFit(mu[0] * b1 + mu[1] * b2, False)


def axis_point(v, moment):
    """Point of the line ``(v, moment)`` closest to the origin."""
    v = np.asarray(v, dtype=float)
    return np.cross(v, moment) / (v @ v)


def initialize_patches(model, params, patches):
    """Set target planes (and axis moments of rotational patches) from ``model``.

    Uses the main principal directions and confidence weights of the
    surface at ``params``; weights are computed once here and not updated.
    """
    frames = precompute_rows(model, params).evaluate(model.flat_points())
    frame = PointFrame.from_quantities(frames)
    data = principal(frame)
    normals = frame.normal
    flags = []
    for patch in patches:
        ids = patch.sample_ids
        target = patch.d_target if patch.d_fixed else None
        if target is not None and abs(target) == 1.0:
            mean = normals[ids].mean(axis=0)
            fit = PlaneFit(-np.sign(target) * mean / np.linalg.norm(mean), float(target))
        else:
            fit = init_plane(data.q1[ids], data.weight[ids], normals[ids], target)
        patch.plane_v, patch.plane_d = fit.v, fit.d
        degenerate = False
        if patch.rotational:
            axis = init_axis_moment(frames[0][ids], normals[ids], fit.v)
            patch.axis_moment = axis.moment
            degenerate = axis.degenerate
        flags.append((fit.ambiguous, degenerate))
    return flags
