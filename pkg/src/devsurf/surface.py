"""Bicubic B-spline surfaces and C0 grids of bicubic Bezier panels.

A panel grid is stored as an ordinary cubic B-spline whose interior knots
have multiplicity three, so both kinds share one evaluator.  Every cached
sample quantity is a fixed linear combination of the control points; see
:func:`precompute_rows`.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError

DEGREE = 3
QUANTITIES = ("value", "u", "v", "uu", "uv", "vv")


def clamped_knots(n_ctrl):
    """Uniform clamped cubic knot vector for ``n_ctrl`` control points."""
    if n_ctrl < 4:
        raise DomainError(f"need at least 4 control points, got {n_ctrl}")
    n_inner = n_ctrl - 4
    inner = np.arange(1, n_inner + 1) / (n_inner + 1)
    return np.concatenate([np.zeros(4), inner, np.ones(4)])


def panel_knots(n_panels):
    """Clamped knots with triple interior knots: one Bezier piece per panel."""
    if n_panels < 1:
        raise DomainError(f"need at least one panel, got {n_panels}")
    inner = np.repeat(np.arange(1, n_panels) / n_panels, 3)
    return np.concatenate([np.zeros(4), inner, np.ones(4)])


def check_knots(knots, n_ctrl=None):
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or len(knots) < 8:
        raise DomainError("knot vector must be 1-D with at least 8 entries")
    if not np.all(np.isfinite(knots)):
        raise DomainError("knot vector contains non-finite values")
    if np.any(np.diff(knots) < 0):
        raise DomainError("knot vector must be nondecreasing")
    if knots[0] != 0.0 or knots[-1] != 1.0:
        raise DomainError("knot vector must span [0, 1]")
    if np.any(knots[:4] != 0.0) or np.any(knots[-4:] != 1.0):
        raise DomainError("knot vector must be clamped (end multiplicity 4)")
    _, counts = np.unique(knots[4:-4], return_counts=True)
    if np.any(counts > DEGREE):
        raise DomainError("interior knot multiplicity exceeds 3 (zero-length span)")
    if n_ctrl is not None and len(knots) != n_ctrl + DEGREE + 1:
        raise DomainError(
            f"{len(knots)} knots do not match {n_ctrl} control points")
    return knots


def find_span(knots, u):
    """Index ``i`` with ``knots[i] <= u < knots[i+1]``; u=1 maps to the last span."""
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"parameter {u!r} outside [0, 1]")
    n = len(knots) - DEGREE - 2
    if u >= knots[n + 1]:
        return n
    return int(np.searchsorted(knots, u, side="right")) - 1


def basis_funs(knots, u, nder=2):
    """Nonzero cubic basis functions and derivatives at ``u``.

    Returns ``(span, ders)`` where ``ders[k, r]`` is the k-th derivative of
    basis function ``span - 3 + r``.
    """
    knots = np.asarray(knots, dtype=float)
    span = find_span(knots, u)
    p = DEGREE
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            # lower triangle stores knot differences
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nder + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nder + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    factor = float(p)
    for k in range(1, nder + 1):
        ders[k] *= factor
        factor *= p - k
    return span, ders


def basis_eval(knots, u, order=0):
    """The four active basis values (or their ``order``-th derivative) at ``u``."""
    if order not in (0, 1, 2):
        raise DomainError(f"derivative order must be 0, 1 or 2, got {order}")
    _, ders = basis_funs(knots, u, nder=order)
    return ders[order]


@dataclass
class ControlGrid:
    """Control net of shape ``(n+1, m+1, 3)``; dimensions are fixed."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[2] != 3:
            raise DomainError(f"control grid must have shape (n+1, m+1, 3), got {pts.shape}")
        if pts.shape[0] < 4 or pts.shape[1] < 4:
            raise DomainError("control grid needs at least 4x4 points (n, m >= 3)")
        if not np.all(np.isfinite(pts)):
            raise DomainError("control grid contains non-finite coordinates")
        self.points = pts

    @property
    def shape(self):
        return self.points.shape[:2]

    @property
    def n(self):
        return self.points.shape[0] - 1

    @property
    def m(self):
        return self.points.shape[1] - 1

    def set_points(self, points):
        points = np.asarray(points, dtype=float).reshape(self.points.shape)
        if not np.all(np.isfinite(points)):
            raise DomainError("control grid contains non-finite coordinates")
        self.points = points.copy()


@dataclass
class SurfaceModel:
    control: ControlGrid
    knots_u: np.ndarray
    knots_v: np.ndarray
    kind: str = "single-bspline"
    weights: np.ndarray = None
    panel_shape: tuple = None

    def __post_init__(self):
        if not isinstance(self.control, ControlGrid):
            self.control = ControlGrid(self.control)
        nu, nv = self.control.shape
        self.knots_u = check_knots(self.knots_u, nu)
        self.knots_v = check_knots(self.knots_v, nv)
        if self.kind not in ("single-bspline", "panel-grid"):
            raise DomainError(f"unknown surface kind {self.kind!r}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (nu, nv) or np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise DomainError("rational weights must be positive, finite and match the grid")
            self.weights = w
        if self.kind == "panel-grid" and self.panel_shape is None:
            self.panel_shape = ((nu - 1) // 3, (nv - 1) // 3)

    @property
    def points(self):
        return self.control.points

    @property
    def n_ctrl(self):
        nu, nv = self.control.shape
        return nu * nv

    def flat_points(self):
        return self.control.points.reshape(-1, 3)

    def copy(self, points=None):
        pts = self.control.points if points is None else points
        return SurfaceModel(
            ControlGrid(np.array(pts, dtype=float).reshape(self.control.points.shape)),
            self.knots_u.copy(), self.knots_v.copy(), self.kind,
            None if self.weights is None else self.weights.copy(),
            self.panel_shape)

    def panel_index_map(self):
        """``{(a, b): (4, 4) array of flat global control indices}`` per panel."""
        if self.kind != "panel-grid":
            raise DomainError("panel_index_map requires a panel-grid surface")
        nv = self.control.shape[1]
        rows, cols = self.panel_shape
        ii, jj = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
        return {(a, b): (3 * a + ii) * nv + (3 * b + jj)
                for a in range(rows) for b in range(cols)}

    def panel_bounds(self, a, b):
        rows, cols = self.panel_shape
        return (a / rows, (a + 1) / rows), (b / cols, (b + 1) / cols)

    def bbox_diagonal(self):
        pts = self.flat_points()
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def evaluate(self, params):
        """Positions at an ``(K, 2)`` array of parameters."""
        rows = precompute_rows(self, params, quantities=("value",))
        return rows.evaluate(self.flat_points(), "value")


def bspline_surface(points, weights=None):
    """Single bicubic B-spline with uniform clamped knots."""
    grid = ControlGrid(points)
    nu, nv = grid.shape
    return SurfaceModel(grid, clamped_knots(nu), clamped_knots(nv),
                        "single-bspline", weights)


def build_panel_grid(rows, cols, init=None):
    """C0 grid of ``rows x cols`` bicubic Bezier panels with shared edge points.

    ``init`` seeds the ``(3*rows+1, 3*cols+1, 3)`` global control grid; the
    default is the unit square in the z=0 plane.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"panel grid dimensions must be positive integers, got {rows}x{cols}")
    nu, nv = 3 * rows + 1, 3 * cols + 1
    if init is None:
        uu, vv = np.meshgrid(np.linspace(0, 1, nu), np.linspace(0, 1, nv), indexing="ij")
        init = np.stack([uu, vv, np.zeros_like(uu)], axis=-1)
    init = np.asarray(init, dtype=float)
    if init.shape != (nu, nv, 3):
        raise ValueError(f"seed grid must have shape {(nu, nv, 3)}, got {init.shape}")
    return SurfaceModel(ControlGrid(init), panel_knots(rows), panel_knots(cols),
                        "panel-grid", None, (rows, cols))


def _tensor_coefficients(model, u, v):
    """Flat control indices (16,) and coefficients (6, 16) at one parameter."""
    su, bu = basis_funs(model.knots_u, u, 2)
    sv, bv = basis_funs(model.knots_v, v, 2)
    nv = model.control.shape[1]
    iu = np.arange(su - 3, su + 1)
    iv = np.arange(sv - 3, sv + 1)
    idx = (iu[:, None] * nv + iv[None, :]).ravel()
    outer = lambda a, b: np.outer(a, b).ravel()
    coef = np.stack([
        outer(bu[0], bv[0]), outer(bu[1], bv[0]), outer(bu[0], bv[1]),
        outer(bu[2], bv[0]), outer(bu[1], bv[1]), outer(bu[0], bv[2]),
    ])
    if model.weights is not None:
        coef = _rationalize(coef, model.weights.ravel()[idx])
    return idx, coef


def _rationalize(coef, w):
    # quotient rule for R = N w / W, applied to value and all partials
    a = coef * w
    W = a.sum(axis=1)
    R = a[0] / W[0]
    Ru = (a[1] - R * W[1]) / W[0]
    Rv = (a[2] - R * W[2]) / W[0]
    Ruu = (a[3] - 2 * Ru * W[1] - R * W[3]) / W[0]
    Ruv = (a[4] - Ru * W[2] - Rv * W[1] - R * W[4]) / W[0]
    Rvv = (a[5] - 2 * Rv * W[2] - R * W[5]) / W[0]
    return np.stack([R, Ru, Rv, Ruu, Ruv, Rvv])


@dataclass
class BasisRow:
    """Sparse linear dependence of one sample quantity on the control points."""

    indices: np.ndarray
    coefficients: np.ndarray

    def dot(self, flat_points):
        return self.coefficients @ flat_points[self.indices]


@dataclass
class SampleRows:
    """Cached basis rows for a set of samples.

    ``idx[k]`` lists the 16 control indices touching sample k and
    ``coef[q, k]`` their weights for quantity ``QUANTITIES[q]``.
    """

    params: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    n_ctrl: int
    _mats: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.params)

    def row(self, k, quantity="value"):
        q = QUANTITIES.index(quantity)
        return BasisRow(self.idx[k], self.coef[q, k])

    def matrix(self, quantity):
        if quantity not in self._mats:
            q = QUANTITIES.index(quantity)
            k = len(self.params)
            rows = np.repeat(np.arange(k), self.idx.shape[1])
            self._mats[quantity] = sp.csr_matrix(
                (self.coef[q].ravel(), (rows, self.idx.ravel())), shape=(k, self.n_ctrl))
        return self._mats[quantity]

    def evaluate(self, flat_points, quantity=None):
        """Cached quantities for control points ``flat_points`` (N, 3).

        With ``quantity`` given returns ``(K, 3)``, otherwise ``(6, K, 3)``.
        """
        flat_points = np.asarray(flat_points, dtype=float).reshape(-1, 3)
        gathered = flat_points[self.idx]
        if quantity is not None:
            return np.einsum("ks,ksd->kd", self.coef[QUANTITIES.index(quantity)], gathered)
        return np.einsum("qks,ksd->qkd", self.coef, gathered)


def precompute_rows(model, samples, quantities=QUANTITIES):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    k = len(samples)
    idx = np.empty((k, 16), dtype=np.int64)
    coef = np.empty((6, k, 16))
    for s, (u, v) in enumerate(samples):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"parameter {v!r} outside [0, 1]")
        idx[s], coef[:, s] = _tensor_coefficients(model, u, v)
    return SampleRows(samples, idx, coef, model.n_ctrl)


def surface_eval(model, u, v):
    idx, coef = _tensor_coefficients(model, u, v)
    return coef[0] @ model.flat_points()[idx]


def surface_partials(model, u, v):
    """``(S_u, S_v, S_uu, S_uv, S_vv)`` of the piece owning ``(u, v)``."""
    idx, coef = _tensor_coefficients(model, u, v)
    vals = coef[1:] @ model.flat_points()[idx]
    return tuple(vals)
