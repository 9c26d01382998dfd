"""Normals, fundamental forms and curvature at surface samples.

All functions broadcast over leading axes: a frame may hold one point
(3-vectors) or a batch (``(K, 3)`` arrays).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParameterizationError

EPS_REG = 1e-10
DET_TOL = 1e-14


@dataclass
class PointFrame:
    position: np.ndarray
    su: np.ndarray
    sv: np.ndarray
    suu: np.ndarray
    suv: np.ndarray
    svv: np.ndarray
    lagged_norm: np.ndarray = None

    @classmethod
    def from_quantities(cls, quantities, lagged_norm=None):
        """Build from the ``(6, ..., 3)`` output of ``SampleRows.evaluate``."""
        return cls(*[np.asarray(q) for q in quantities], lagged_norm=lagged_norm)

    @property
    def cross(self):
        return np.cross(self.su, self.sv)

    @property
    def normal(self):
        return unit_normal(self.su, self.sv, self.lagged_norm)


@dataclass
class PrincipalData:
    kappa1: np.ndarray
    kappa2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    weight: np.ndarray
    umbilic: np.ndarray


def unit_normal(su, sv, lagged_norm=None, eps=EPS_REG):
    """``S_u x S_v`` divided by ``lagged_norm``, or exactly normalized if absent."""
    cross = np.cross(su, sv)
    if lagged_norm is not None:
        return cross / np.asarray(lagged_norm)[..., None]
    norm = np.linalg.norm(cross, axis=-1)
    if np.any(norm <= eps):
        raise DegenerateParameterizationError(
            f"|S_u x S_v| = {np.min(norm):.3e} below regularization threshold {eps:.1e}")
    return cross / norm[..., None]


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def first_form(frame):
    e = _dot(frame.su, frame.su)
    f = _dot(frame.su, frame.sv)
    g = _dot(frame.sv, frame.sv)
    return e, f, g


def fundamental_forms(frame, eps=EPS_REG):
    """``(I, II)`` as ``(..., 2, 2)`` arrays, II taken with the exact unit normal."""
    e, f, g = first_form(frame)
    det = e * g - f * f
    scale = np.maximum(e * g, 1.0)
    if np.any(det <= DET_TOL * scale):
        raise DegenerateParameterizationError("degenerate first fundamental form")
    n = unit_normal(frame.su, frame.sv, eps=eps)
    L, M, N = _dot(n, frame.suu), _dot(n, frame.suv), _dot(n, frame.svv)
    first = np.stack([np.stack([e, f], -1), np.stack([f, g], -1)], -2)
    second = np.stack([np.stack([L, M], -1), np.stack([M, N], -1)], -2)
    return first, second


def gaussian_curvature(frame):
    """K from the triple-product expansion of det(II) over det(I)."""
    e, f, g = first_form(frame)
    det_i = e * g - f * f
    if np.any(det_i <= DET_TOL * np.maximum(e * g, 1.0)):
        raise DegenerateParameterizationError("degenerate first fundamental form")
    cross = np.cross(frame.su, frame.sv)
    t_uu = _dot(frame.suu, cross)
    t_uv = _dot(frame.suv, cross)
    t_vv = _dot(frame.svv, cross)
    return (t_uu * t_vv - t_uv ** 2) / det_i ** 2


def principal(frame, umbilic_tol=1e-9):
    """Principal curvatures (max |kappa| first) and 3-D unit directions.

    Solves ``II x = kappa I x`` through the Cholesky factor of I, so the two
    directions come out orthogonal in space.
    """
    first, second = fundamental_forms(frame)
    chol = np.linalg.cholesky(first)
    inv = np.linalg.inv(chol)
    sym = inv @ second @ np.swapaxes(inv, -1, -2)
    sym = 0.5 * (sym + np.swapaxes(sym, -1, -2))
    evals, evecs = np.linalg.eigh(sym)
    coords = np.swapaxes(inv, -1, -2) @ evecs

    order = np.argsort(-np.abs(evals), axis=-1)
    evals = np.take_along_axis(evals, order, axis=-1)
    coords = np.take_along_axis(coords, order[..., None, :], axis=-1)

    dirs = []
    for c in range(2):
        d = coords[..., 0, c, None] * frame.su + coords[..., 1, c, None] * frame.sv
        dirs.append(d / np.linalg.norm(d, axis=-1, keepdims=True))
    k1, k2 = evals[..., 0], evals[..., 1]
    scale = np.maximum(np.abs(k1), 1e-300)
    umbilic = np.abs(k1 - k2) <= umbilic_tol * scale
    return PrincipalData(k1, k2, dirs[0], dirs[1], confidence_weight(k1, k2), umbilic)


def confidence_weight(kappa1, kappa2):
    """1 - min|kappa| / max|kappa|; flat points get weight 0."""
    a1, a2 = np.abs(kappa1), np.abs(kappa2)
    hi = np.maximum(a1, a2)
    lo = np.minimum(a1, a2)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(hi > 0, 1.0 - lo / np.where(hi > 0, hi, 1.0), 0.0)
    return w if np.ndim(w) else float(w)


def shape_operator(frame):
    """``I^{-1} II``; its eigenvalues are the principal curvatures."""
    first, second = fundamental_forms(frame)
    return np.linalg.solve(first, second)
