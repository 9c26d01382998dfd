"""Diagnostics: Gauss images, curvature maps and induced ruling directions."""
from dataclasses import dataclass, field

import numpy as np

from .diffgeo import PointFrame, gaussian_curvature, principal, unit_normal
from .errors import DegenerateCircleError, DegenerateParameterizationError, DomainError
from .surface import precompute_rows


class AmbiguousProjectionError(DomainError):
    """The normal is parallel to the plane normal, so every circle point is closest."""


@dataclass
class RulingSample:
    p: np.ndarray
    n: np.ndarray
    q: np.ndarray
    r_t: np.ndarray
    r_o: np.ndarray
    patch: int = -1
    inflection: bool = False


def _unit(v, axis=-1):
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def closest_point_on_circle(n, v, d, tol=1e-12):
    """Closest point to ``n`` on the circle where the plane ``v . x + d = 0`` cuts the unit sphere.

    Works on a single normal or a ``(K, 3)`` batch.  ``v`` need not be unit.
    """
    v = np.asarray(v, dtype=float)
    scale = np.linalg.norm(v)
    if scale == 0:
        raise DegenerateCircleError("plane normal is zero")
    v, d = v / scale, float(d) / scale
    if abs(d) >= 1.0:
        raise DegenerateCircleError(f"plane at distance {abs(d):.6g} >= 1 misses the sphere")
    n = np.asarray(n, dtype=float)
    w = n - (n @ v)[..., None] * v
    length = np.linalg.norm(w, axis=-1)
    if np.any(length <= tol):
        raise AmbiguousProjectionError("normal parallel to the plane normal")
    rho = np.sqrt(1.0 - d * d)
    return -d * v + rho * w / length[..., None]


def ruling_frame(q, v, orient=None):
    """Circle tangent ``r_t`` and sphere tangent ``r_o`` at circle points ``q``.

    ``r_o`` is flipped toward ``orient`` when given (per row), else toward ``v``.
    """
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    q = np.atleast_2d(q)
    r_t = _unit(np.cross(v, q))
    r_o = _unit(np.cross(r_t, q))
    ref = np.broadcast_to(v, q.shape) if orient is None else np.atleast_2d(orient)
    flip = np.einsum("ij,ij->i", r_o, ref) < 0
    r_o[flip] *= -1
    return r_t, r_o


def induced_rulings(points, normals, v, d, q2=None, kappa1=None, flat_tol=0.0, patch=-1):
    """Translate circle tangents at the closest circle points back to the samples.

    ``q2`` (second principal directions) orients ``r_o``; ``kappa1`` with
    ``flat_tol`` flags samples where the ruling estimate is unreliable.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    q = np.atleast_2d(closest_point_on_circle(normals, v, d))
    r_t, r_o = ruling_frame(q, v, q2)
    flat = np.zeros(len(q), bool) if kappa1 is None else np.abs(kappa1) < flat_tol
    return [RulingSample(points[k], normals[k], q[k], r_t[k], r_o[k], patch, bool(flat[k]))
            for k in range(len(q))]


def surface_rulings(model, params, patches, flat_factor=1e-6):
    """Induced rulings of every (patch, sample) pair of a planed surface."""
    frame = PointFrame.from_quantities(precompute_rows(model, params).evaluate(model.flat_points()))
    data = principal(frame)
    normals = frame.normal
    flat_tol = flat_factor / max(model.bbox_diagonal(), 1e-300)
    out = []
    for j, patch in enumerate(patches):
        ids = patch.sample_ids
        out.extend(induced_rulings(frame.position[ids], normals[ids], patch.plane_v,
                                   patch.plane_d, data.q2[ids], data.kappa1[ids], flat_tol, j))
    return out


@dataclass
class CurvatureMap:
    params: np.ndarray
    K: np.ndarray
    skipped: int
    summary: dict = field(default_factory=dict)


def curvature_map(model, params, points=None):
    """Gaussian curvature at ``params``; samples with degenerate frames are NaN and counted."""
    params = np.asarray(params, dtype=float)
    q = precompute_rows(model, params).evaluate(model.flat_points() if points is None
                                                else points)
    K = np.full(len(params), np.nan)
    for k in range(len(params)):
        try:
            K[k] = gaussian_curvature(PointFrame.from_quantities(q[:, k]))
        except DegenerateParameterizationError:
            pass
    good = np.abs(K[np.isfinite(K)])
    summary = {"count": int(good.size), "skipped": int(len(K) - good.size)}
    if good.size:
        summary.update({"max_abs": float(good.max()), "mean_abs": float(good.mean()),
                        "p50": float(np.percentile(good, 50)),
                        "p90": float(np.percentile(good, 90))})
    return CurvatureMap(params, K, summary["skipped"], summary)


@dataclass
class GaussImage:
    normals: np.ndarray
    planes: list
    patch_distance: np.ndarray

    @property
    def thickness(self):
        return float(self.patch_distance.max()) if len(self.patch_distance) else 0.0


def gauss_image(normals, patches, planes=None):
    """Exactly normalized sample normals plus each patch's maximal plane distance.

    ``planes`` is a sequence of ``(v, d)``; by default the patches' own planes.
    """
    normals = _unit(np.asarray(normals, dtype=float))
    if planes is None:
        planes = [(np.asarray(p.plane_v, float), float(p.plane_d)) for p in patches]
    dist = np.array([np.max(np.abs(normals[p.sample_ids] @ v + d)) if len(p.sample_ids) else 0.0
                     for p, (v, d) in zip(patches, planes)])
    return GaussImage(normals, [(np.asarray(v, float), float(d)) for v, d in planes], dist)


def problem_gauss_image(problem, state):
    """Gauss image of an energy problem's developability samples at ``state``."""
    frames = problem.frames(state)
    normals = unit_normal(frames[1], frames[2])
    planes = list(zip(state.v, state.d))
    return gauss_image(normals, problem.patches, planes)
