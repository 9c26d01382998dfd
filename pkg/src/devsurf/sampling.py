"""Parameter-space sample lattices and their grouping into patches."""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SampleGrid:
    L_u: int
    L_v: int
    params: np.ndarray

    def __len__(self):
        return len(self.params)

    def sample_id(self, i, j):
        return i * self.L_v + j


@dataclass
class Patch:
    """A group of sample ids sharing one target plane ``v . x + d = 0``."""

    id: int
    sample_ids: np.ndarray
    plane_v: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    plane_d: float = 0.0
    axis_moment: np.ndarray = None
    d_target: float = None
    d_fixed: bool = False
    rotational: bool = False
    panel: tuple = None

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        if len(self.sample_ids) == 0:
            raise ValueError(f"patch {self.id} has no samples")


def lattice(count):
    return np.linspace(0.0, 1.0, count)


def make_grid(L_u, L_v):
    """``L_u x L_v`` samples including the domain corners, row-major ids."""
    if L_u < 2 or L_v < 2:
        raise ValueError(f"sample counts must be >= 2, got {L_u}x{L_v}")
    uu, vv = np.meshgrid(lattice(L_u), lattice(L_v), indexing="ij")
    return SampleGrid(L_u, L_v, np.column_stack([uu.ravel(), vv.ravel()]))


def patch_starts(length, size, overlap):
    """Start offsets of windows of ``size`` with stride ``size - overlap``.

    The last window is shifted inward so it ends at the grid boundary.
    """
    stride = size - overlap
    count = math.ceil((length - size) / stride) + 1
    return [min(i * stride, length - size) for i in range(count)]


def group_overlapping(grid, size_u, size_v, overlap_u, overlap_v):
    for name, size, overlap, length in (("u", size_u, overlap_u, grid.L_u),
                                        ("v", size_v, overlap_v, grid.L_v)):
        if not (size > overlap >= 1):
            raise ValueError(f"patch size/overlap along {name} must satisfy size > overlap >= 1")
        if size > length:
            raise ValueError(f"patch size {size} exceeds {length} samples along {name}")
    patches = []
    for su in patch_starts(grid.L_u, size_u, overlap_u):
        for sv in patch_starts(grid.L_v, size_v, overlap_v):
            ii, jj = np.meshgrid(np.arange(su, su + size_u), np.arange(sv, sv + size_v),
                                 indexing="ij")
            patches.append(Patch(len(patches), (ii * grid.L_v + jj).ravel()))
    return patches


def interior_lattice(lo, hi, count):
    """``count`` points strictly inside ``(lo, hi)`` at spacing (hi-lo)/(count+1)."""
    return lo + (hi - lo) * np.arange(1, count + 1) / (count + 1)


def group_by_panel(model, per_panel_L):
    """One patch per panel, sampled on an interior lattice.

    Returns ``(params, patches)``; samples of panel r are contiguous.
    """
    if model.kind != "panel-grid":
        raise ValueError("group_by_panel requires a panel-grid surface")
    lu, lv = per_panel_L
    rows, cols = model.panel_shape
    params, patches = [], []
    for a in range(rows):
        for b in range(cols):
            (u0, u1), (v0, v1) = model.panel_bounds(a, b)
            uu, vv = np.meshgrid(interior_lattice(u0, u1, lu), interior_lattice(v0, v1, lv),
                                 indexing="ij")
            start = sum(len(p) for p in params)
            params.append(np.column_stack([uu.ravel(), vv.ravel()]))
            patches.append(Patch(len(patches), np.arange(start, start + lu * lv), panel=(a, b)))
    return np.concatenate(params), patches


def panel_lattice(model, per_panel_L):
    """Interior lattice over every panel, e.g. for closeness samples."""
    params, _ = group_by_panel(model, per_panel_L)
    return params
