"""Residual blocks, analytic Jacobians and the stacked least-squares system.

Every block holds unweighted residuals (the internal lambda factors are
applied); :func:`assemble` scales each block by the square root of its
outer weight so that ``||r||^2`` is the weighted total energy.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateParameterizationError
from .initializers import init_axis_moment
from .surface import precompute_rows

BLOCK_KINDS = ("developability", "unit-length", "rotationality", "pluecker",
               "closeness", "point-distance", "fairness1", "fairness2")
MOMENT_MODES = ("variable", "refit-per-iteration")


@dataclass
class EnergyWeights:
    w_d: float = 1.0
    w_r: float = 0.0
    w_c: float = 0.0
    w_f: float = 0.0
    w_f1: float = 0.0
    w_f2: float = 1.0
    w_p: float = 0.0
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"weight {name} must be finite and nonnegative, got {value}")

    def block_weight(self, kind):
        return {
            "developability": self.w_d, "unit-length": self.w_d,
            "rotationality": self.w_r, "pluecker": self.w_r,
            "closeness": self.w_c, "point-distance": self.w_p,
            "fairness1": self.w_f * self.w_f1, "fairness2": self.w_f * self.w_f2,
        }[kind]


@dataclass
class State:
    """Control points plus per-patch plane ``(v, d)`` and axis moment."""

    points: np.ndarray
    v: np.ndarray
    d: np.ndarray
    moment: np.ndarray

    def copy(self):
        return State(self.points.copy(), self.v.copy(), self.d.copy(), self.moment.copy())


class VariableLayout:
    """Slots of the unknown vector.

    Control points come first (3 slots each unless masked as fixed), then per
    patch 3 slots for v, 1 for d unless d is prescribed, and 3 for the axis
    moment of rotational patches when moments are variables.
    """

    def __init__(self, n_ctrl, patches, fixed_mask=None, moment_mode="variable"):
        if moment_mode not in MOMENT_MODES:
            raise ValueError(f"unknown moment_mode {moment_mode!r}")
        self.n_ctrl = n_ctrl
        self.moment_mode = moment_mode
        fixed = np.zeros(n_ctrl, bool) if fixed_mask is None else np.asarray(fixed_mask, bool)
        if fixed.shape != (n_ctrl,):
            raise ValueError("fixed-point mask must have one entry per control point")
        self.fixed = fixed.copy()
        self.ctrl_slot = np.full(n_ctrl, -1, dtype=np.int64)
        free = np.flatnonzero(~fixed)
        self.ctrl_slot[free] = 3 * np.arange(len(free))
        pos = 3 * len(free)
        n = len(patches)
        self.v_slot = np.full(n, -1, dtype=np.int64)
        self.d_slot = np.full(n, -1, dtype=np.int64)
        self.m_slot = np.full(n, -1, dtype=np.int64)
        for i, patch in enumerate(patches):
            self.v_slot[i] = pos
            pos += 3
            if not patch.d_fixed:
                self.d_slot[i] = pos
                pos += 1
            if patch.rotational and moment_mode == "variable":
                self.m_slot[i] = pos
                pos += 3
        self.size = pos

    @property
    def n_free_ctrl(self):
        return int(np.count_nonzero(~self.fixed))

    def pack(self, state):
        x = np.zeros(self.size)
        free = self.ctrl_slot >= 0
        x[self.ctrl_slot[free, None] + np.arange(3)] = state.points[free]
        for i in range(len(self.v_slot)):
            x[self.v_slot[i]:self.v_slot[i] + 3] = state.v[i]
            if self.d_slot[i] >= 0:
                x[self.d_slot[i]] = state.d[i]
            if self.m_slot[i] >= 0:
                x[self.m_slot[i]:self.m_slot[i] + 3] = state.moment[i]
        return x

    def unpack(self, x, template):
        state = template.copy()
        free = self.ctrl_slot >= 0
        state.points[free] = x[self.ctrl_slot[free, None] + np.arange(3)]
        for i in range(len(self.v_slot)):
            state.v[i] = x[self.v_slot[i]:self.v_slot[i] + 3]
            if self.d_slot[i] >= 0:
                state.d[i] = x[self.d_slot[i]]
            if self.m_slot[i] >= 0:
                state.moment[i] = x[self.m_slot[i]:self.m_slot[i] + 3]
        return state

    def apply(self, state, delta):
        return self.unpack(self.pack(state) + delta, state)


@dataclass
class ResidualBlock:
    kind: str
    values: np.ndarray
    rows: np.ndarray = None
    cols: np.ndarray = None
    vals: np.ndarray = None

    @property
    def energy(self):
        return float(self.values @ self.values)

    def jacobian(self, n_vars):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)),
                             shape=(len(self.values), n_vars))


@dataclass
class Context:
    """Quantities frozen within one iteration: lagged norms and closest points."""

    lagged_norm: np.ndarray
    closest_points: np.ndarray = None
    closest_normals: np.ndarray = None


@dataclass
class Assembly:
    r: np.ndarray
    J: sp.csr_matrix
    blocks: dict
    energies: dict

    @property
    def total(self):
        return self.energies["E_total"]


def _ctrl_entries(res_ids, idx, grads, layout):
    """COO entries for residual rows depending on control points.

    ``grads[i, s]`` is the 3-gradient of residual ``res_ids[i]`` with respect
    to control point ``idx[i, s]``.
    """
    slots = layout.ctrl_slot[idx]
    keep = slots >= 0
    rows = np.broadcast_to(res_ids[:, None], idx.shape)[keep]
    base = slots[keep]
    g = grads[keep]
    return (np.repeat(rows, 3), (base[:, None] + np.arange(3)).ravel(), g.ravel())


def _param_entries(res_ids, slots, grads):
    keep = slots >= 0
    width = grads.shape[1]
    rows = np.repeat(res_ids[keep], width)
    cols = (slots[keep, None] + np.arange(width)).ravel()
    return rows, cols, grads[keep].ravel()


def _block(kind, values, entries):
    if entries is None:
        return ResidualBlock(kind, values)
    if not entries:
        empty = np.zeros(0, dtype=np.int64)
        return ResidualBlock(kind, values, empty, empty, np.zeros(0))
    rows, cols, vals = (np.concatenate(parts) for parts in zip(*entries))
    return ResidualBlock(kind, values, rows.astype(np.int64), cols.astype(np.int64), vals)


def pair_arrays(patches):
    """Flattened ``(patch index, sample id)`` pairs over all patches."""
    pj = np.concatenate([np.full(len(p.sample_ids), i) for i, p in enumerate(patches)])
    pk = np.concatenate([p.sample_ids for p in patches])
    return pj.astype(np.int64), pk.astype(np.int64)


def residuals_developability(patches, frames, rows, state, layout, lagged_norm,
                             lambda1=1.0, jacobian=True, projected=False):
    """Plane-distance residuals ``n_k . v_j + d_j`` and unit-length residuals.

    ``frames`` is the ``(6, K, 3)`` evaluation of the developability samples.
    """
    pj, pk = pair_arrays(patches)
    su, sv = frames[1][pk], frames[2][pk]
    ell = lagged_norm[pk]
    cross = np.cross(su, sv)
    n = cross / ell[:, None]
    v = state.v[pj]
    values = np.einsum("ij,ij->i", n, v) + state.d[pj]
    sq = np.sqrt(lambda1)
    unit_values = sq * (np.einsum("ij,ij->i", state.v, state.v) - 1.0)
    if not jacobian:
        return (ResidualBlock("developability", values),
                ResidualBlock("unit-length", unit_values))

    ids = np.arange(len(values))
    a = rows.coef[1][pk]
    b = rows.coef[2][pk]
    if projected:
        v = v - np.einsum("ij,ij->i", n, v)[:, None] * n
    g_su = np.cross(sv, v) / ell[:, None]
    g_sv = np.cross(v, su) / ell[:, None]
    grads = a[:, :, None] * g_su[:, None, :] + b[:, :, None] * g_sv[:, None, :]
    entries = [
        _ctrl_entries(ids, rows.idx[pk], grads, layout),
        _param_entries(ids, layout.v_slot[pj], n),
        _param_entries(ids, layout.d_slot[pj], np.ones((len(ids), 1))),
    ]
    pids = np.arange(len(patches))
    unit = _param_entries(pids, layout.v_slot, 2 * sq * state.v)
    return _block("developability", values, entries), _block("unit-length", unit_values, [unit])


def residuals_rotationality(patches, frames, rows, state, layout, lagged_norm,
                            lambda2=1.0, jacobian=True, projected=False):
    """Coplanarity of normal lines with the axis ``(v, vbar)`` plus the Plucker condition."""
    rot = [i for i, p in enumerate(patches) if p.rotational]
    if not rot:
        empty = np.zeros(0)
        return (_block("rotationality", empty, [] if jacobian else None),
                _block("pluecker", empty, [] if jacobian else None))
    sub = [patches[i] for i in rot]
    pj_local, pk = pair_arrays(sub)
    pj = np.asarray(rot)[pj_local]
    p = frames[0][pk]
    su, sv = frames[1][pk], frames[2][pk]
    ell = lagged_norm[pk][:, None]
    N = np.cross(su, sv)
    v = state.v[pj]
    vbar = state.moment[pj]
    m = np.cross(v, p) + vbar
    values = np.einsum("ij,ij->i", N, m) / ell[:, 0]
    sq = np.sqrt(lambda2)
    rot_arr = np.asarray(rot)
    pl_values = sq * np.einsum("ij,ij->i", state.v[rot_arr], state.moment[rot_arr])
    if not jacobian:
        return ResidualBlock("rotationality", values), ResidualBlock("pluecker", pl_values)

    ids = np.arange(len(values))
    c0 = rows.coef[0][pk]
    a = rows.coef[1][pk]
    b = rows.coef[2][pk]
    g_p = np.cross(N, v) / ell
    if projected:
        n = N / ell
        m = m - np.einsum("ij,ij->i", n, m)[:, None] * n
    g_su = np.cross(sv, m) / ell
    g_sv = np.cross(m, su) / ell
    grads = (c0[:, :, None] * g_p[:, None, :] + a[:, :, None] * g_su[:, None, :]
             + b[:, :, None] * g_sv[:, None, :])
    entries = [
        _ctrl_entries(ids, rows.idx[pk], grads, layout),
        _param_entries(ids, layout.v_slot[pj], np.cross(p, N) / ell),
        _param_entries(ids, layout.m_slot[pj], N / ell),
    ]
    pids = np.arange(len(rot))
    pl_entries = [
        _param_entries(pids, layout.v_slot[rot_arr], sq * state.moment[rot_arr]),
        _param_entries(pids, layout.m_slot[rot_arr], sq * state.v[rot_arr]),
    ]
    return (_block("rotationality", values, entries), _block("pluecker", pl_values, pl_entries))


def residuals_closeness(positions, rows, closest_points, closest_normals, layout,
                        jacobian=True):
    """Tangential distances ``(p_k - x_k) . N(x_k)`` to the reference."""
    values = np.einsum("ij,ij->i", positions - closest_points, closest_normals)
    if not jacobian:
        return ResidualBlock("closeness", values)
    ids = np.arange(len(values))
    grads = rows.coef[0][:, :, None] * closest_normals[:, None, :]
    return _block("closeness", values, [_ctrl_entries(ids, rows.idx, grads, layout)])


def residuals_point_distance(positions, rows, closest_points, layout, jacobian=True):
    """Full offsets ``x_k - p_k``, three residuals per sample.

    Tangential distance alone lets samples slide along the reference for
    free; a small weight on this block anchors them.
    """
    values = (positions - closest_points).ravel()
    if not jacobian:
        return ResidualBlock("point-distance", values)
    count, width = rows.idx.shape
    entries = []
    for axis in range(3):
        grads = np.zeros((count, width, 3))
        grads[:, :, axis] = rows.coef[0]
        entries.append(_ctrl_entries(3 * np.arange(count) + axis, rows.idx, grads, layout))
    return _block("point-distance", values, entries)


def difference_operators(shape):
    """Sparse first- and second-difference operators on a flattened control grid."""
    nu, nv = shape
    idx = np.arange(nu * nv).reshape(nu, nv)

    def stencil(pieces):
        r, c, w = [], [], []
        start = 0
        for weights, index_sets in pieces:
            count = index_sets[0].size
            for wt, ids in zip(weights, index_sets):
                r.append(start + np.arange(count))
                c.append(ids.ravel())
                w.append(np.full(count, wt, dtype=float))
            start += count
        return sp.csr_matrix((np.concatenate(w), (np.concatenate(r), np.concatenate(c))),
                             shape=(start, nu * nv))

    first = stencil([
        ((1.0, -1.0), (idx[1:, :], idx[:-1, :])),
        ((1.0, -1.0), (idx[:, 1:], idx[:, :-1])),
    ])
    second = stencil([
        ((1.0, -2.0, 1.0), (idx[2:, :], idx[1:-1, :], idx[:-2, :])),
        ((1.0, -2.0, 1.0), (idx[:, 2:], idx[:, 1:-1], idx[:, :-2])),
    ])
    return first, second


def residuals_fairness(points, shape, layout, operators=None, jacobian=True):
    """First and second control-net differences, one residual per coordinate."""
    first, second = operators or difference_operators(shape)
    blocks = []
    for kind, D in (("fairness1", first), ("fairness2", second)):
        values = (D @ points).ravel()
        if not jacobian:
            blocks.append(ResidualBlock(kind, values))
            continue
        coo = D.tocoo()
        slots = layout.ctrl_slot[coo.col]
        keep = slots >= 0
        rows = (3 * coo.row[keep, None] + np.arange(3)).ravel()
        cols = (slots[keep, None] + np.arange(3)).ravel()
        vals = np.repeat(coo.data[keep], 3)
        blocks.append(ResidualBlock(kind, values, rows, cols, vals))
    return tuple(blocks)


def assemble(blocks, weights, layout, jacobian=True):
    """Stack blocks scaled by sqrt(weight); returns an :class:`Assembly`."""
    by_kind = {b.kind: b for b in blocks}
    parts_r, parts_J = [], []
    for block in blocks:
        w = weights.block_weight(block.kind)
        if w == 0 or len(block.values) == 0:
            continue
        s = np.sqrt(w)
        parts_r.append(s * block.values)
        if jacobian:
            if block.rows is None:
                raise ValueError(f"block {block.kind} carries no Jacobian")
            if len(block.cols) and block.cols.max() >= layout.size:
                raise ValueError(f"block {block.kind} addresses slots beyond the layout")
            parts_J.append(s * block.jacobian(layout.size))
    r = np.concatenate(parts_r) if parts_r else np.zeros(0)
    J = None
    if jacobian:
        J = sp.vstack(parts_J, format="csr") if parts_J else sp.csr_matrix((0, layout.size))
    return Assembly(r, J, by_kind, component_energies(by_kind, weights))


def component_energies(blocks, weights):
    e = {k: (blocks[k].energy if k in blocks else 0.0) for k in BLOCK_KINDS}
    E_d = e["developability"] + e["unit-length"]
    E_r = e["rotationality"] + e["pluecker"]
    E_c = e["closeness"]
    E_p = e["point-distance"]
    E_f = weights.w_f1 * e["fairness1"] + weights.w_f2 * e["fairness2"]
    total = (weights.w_d * E_d + weights.w_r * E_r + weights.w_c * E_c + weights.w_p * E_p
             + weights.w_f * E_f)
    return {"E_total": total, "E_d": E_d, "E_r": E_r, "E_c": E_c, "E_p": E_p, "E_f": E_f}


class EnergyProblem:
    """A surface, its sample sets, patches and reference, ready for assembly.

    ``dev_params`` are the samples grouped by ``patches`` (developability and
    rotationality); ``close_params`` are the closeness samples.
    """

    def __init__(self, model, patches, dev_params, weights, reference=None,
                 close_params=None, fixed_mask=None, moment_mode="variable",
                 normal_jacobian="projected"):
        self.model = model
        self.patches = list(patches)
        self.weights = weights
        self.reference = reference
        self.moment_mode = moment_mode
        self.normal_jacobian = normal_jacobian
        self.shape = model.control.shape
        self.layout = VariableLayout(model.n_ctrl, self.patches, fixed_mask, moment_mode)
        self.dev_rows = precompute_rows(model, dev_params) if len(self.patches) else None
        if reference is not None:
            if close_params is None:
                close_params = dev_params
            self.close_rows = precompute_rows(model, close_params)
        else:
            self.close_rows = None
        self.fair_ops = difference_operators(self.shape)

    @property
    def projected(self):
        return self.normal_jacobian == "projected"

    def initial_state(self):
        n = len(self.patches)
        v = np.array([p.plane_v for p in self.patches], dtype=float).reshape(n, 3)
        d = np.array([p.d_target if p.d_fixed else p.plane_d for p in self.patches],
                     dtype=float).reshape(n)
        m = np.array([np.zeros(3) if p.axis_moment is None else p.axis_moment
                      for p in self.patches], dtype=float).reshape(n, 3)
        return State(self.model.flat_points().copy(), v, d, m)

    def frames(self, state):
        return self.dev_rows.evaluate(state.points)

    def context(self, state, frames=None):
        lagged = None
        if self.dev_rows is not None:
            frames = self.frames(state) if frames is None else frames
            lagged = np.linalg.norm(np.cross(frames[1], frames[2]), axis=1)
            eps = 1e-10 * max(self.model.bbox_diagonal(), 1e-300) ** 2
            if np.any(lagged <= eps) or not np.all(np.isfinite(lagged)):
                raise DegenerateParameterizationError("vanishing surface normal at a sample")
        ctx = Context(lagged)
        if self.reference is not None:
            pos = self.close_rows.evaluate(state.points, "value")
            nearest = self.reference.closest(pos)
            ctx.closest_points = self.reference.points[nearest]
            ctx.closest_normals = self.reference.normals[nearest]
        return ctx

    def refit_moments(self, state, frames=None):
        """Replace axis moments by their least-squares fit (refit mode only)."""
        if self.moment_mode != "refit-per-iteration":
            return state
        rot = [i for i, p in enumerate(self.patches) if p.rotational]
        if not rot:
            return state
        frames = self.frames(state) if frames is None else frames
        state = state.copy()
        n = np.cross(frames[1], frames[2])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        for i in rot:
            ids = self.patches[i].sample_ids
            state.moment[i] = init_axis_moment(frames[0][ids], n[ids], state.v[i]).moment
        return state

    def blocks(self, state, ctx, jacobian=True):
        w = self.weights
        out = []
        if self.dev_rows is not None:
            frames = self.frames(state)
            out.extend(residuals_developability(self.patches, frames, self.dev_rows, state,
                                                self.layout, ctx.lagged_norm, w.lambda1,
                                                jacobian, self.projected))
            if any(p.rotational for p in self.patches):
                out.extend(residuals_rotationality(self.patches, frames, self.dev_rows, state,
                                                   self.layout, ctx.lagged_norm, w.lambda2,
                                                   jacobian, self.projected))
        if self.reference is not None:
            pos = self.close_rows.evaluate(state.points, "value")
            out.append(residuals_closeness(pos, self.close_rows, ctx.closest_points,
                                           ctx.closest_normals, self.layout, jacobian))
            if w.w_p > 0:
                out.append(residuals_point_distance(pos, self.close_rows, ctx.closest_points,
                                                    self.layout, jacobian))
        out.extend(residuals_fairness(state.points, self.shape, self.layout, self.fair_ops,
                                      jacobian))
        return out

    def assemble(self, state, ctx=None, jacobian=True):
        ctx = self.context(state) if ctx is None else ctx
        return assemble(self.blocks(state, ctx, jacobian), self.weights, self.layout, jacobian)

    def prepare(self, state):
        """Refit moments (if configured) and refresh the per-iteration context."""
        state = self.refit_moments(state)
        return state, self.context(state)

    def model_at(self, state):
        return self.model.copy(state.points)

    def store_planes(self, state):
        """Copy plane/moment values of ``state`` back into the patch objects."""
        for i, patch in enumerate(self.patches):
            patch.plane_v = state.v[i].copy()
            patch.plane_d = float(state.d[i])
            if patch.rotational:
                patch.axis_moment = state.moment[i].copy()

