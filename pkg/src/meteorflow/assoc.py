"""Mutual k-nearest-neighbour matching of components across two frames."""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels

DEFAULT_KNN_K = 3
DEFAULT_KNN_D = 100.0


class Association(NamedTuple):
    """A component matched between frame t-1 and frame t.

    ``dx``/``dy`` point from the previous centroid to the current one.
    ``residual`` and ``inlier`` stay ``None`` until motion estimation.
    """

    prev_label: int
    cur_label: int
    dx: float
    dy: float
    dist: float
    residual: Optional[float] = None
    inlier: Optional[bool] = None


@dataclass(frozen=True)
class KnnParams:
    k: int = DEFAULT_KNN_K
    max_dist: float = DEFAULT_KNN_D

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.max_dist > 0:
            raise ValueError(f"max_dist must be > 0, got {self.max_dist}")


def _by_label(ccs):
    if all(a.label < b.label for a, b in zip(ccs, ccs[1:])):
        return ccs
    return sorted(ccs, key=lambda c: c.label)


def match_knn(prev, cur, params: KnnParams = KnnParams()):
    """Match ``prev`` and ``cur`` components.

    A pair is a candidate when each side is among the other's ``k`` nearest
    centroids and their distance is within ``max_dist``.  Candidates are then
    taken greedily by ascending distance (ties: smaller prev label, then
    smaller cur label) so that every label is used at most once.  The result
    is sorted by ``cur_label``.
    """
    if not prev or not cur:
        return []
    prev = _by_label(prev)
    cur = _by_label(cur)
    px = np.array([c.cx for c in prev])
    py = np.array([c.cy for c in prev])
    qx = np.array([c.cx for c in cur])
    qy = np.array([c.cy for c in cur])
    ii, jj = _kernels.mutual_knn(px, py, qx, qy, int(params.k), float(params.max_dist))
    out = []
    for i, j in zip(ii.tolist(), jj.tolist()):
        dx = qx[j] - px[i]
        dy = qy[j] - py[i]
        out.append(Association(prev[i].label, cur[j].label, float(dx), float(dy),
                               math.sqrt(dx * dx + dy * dy)))
    out.sort(key=lambda a: a.cur_label)
    return out
