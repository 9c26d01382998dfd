"""Reference point sets with normals and exact nearest-neighbour lookup."""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class ReferenceCloud:
    points: np.ndarray
    normals: np.ndarray
    source: str = ""
    _tree: cKDTree = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.normals is None:
            raise ValueError("reference cloud requires normals for tangential distances")
        normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValueError("reference cloud is empty")
        if normals.shape != self.points.shape:
            raise ValueError("reference normals must match the points one to one")
        if not (np.all(np.isfinite(self.points)) and np.all(np.isfinite(normals))):
            raise ValueError("reference cloud contains non-finite values")
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(lengths == 0):
            raise ValueError("reference cloud contains zero-length normals")
        self.normals = normals / lengths[:, None]

    def __len__(self):
        return len(self.points)

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.points.max(axis=0) - self.points.min(axis=0)))

    def closest(self, queries):
        """Indices of the nearest reference points; equal distances go to the lowest index."""
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        k = min(4, len(self.points))
        dist, idx = self.tree.query(queries, k=k)
        if k == 1:
            return np.atleast_1d(idx)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        tied = dist == dist[:, :1]
        return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)


def closest_point_query(p, reference):
    """Nearest reference point to ``p`` and its unit normal."""
    if reference is None or len(reference) == 0:
        raise ValueError("closest-point query on an empty reference")
    i = int(reference.closest(p)[0])
    return reference.points[i].copy(), reference.normals[i].copy()
