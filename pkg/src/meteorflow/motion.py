"""Global rigid motion from matched centroids, registration residuals and
static/moving classification."""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .assoc import Association
from .errors import DegenerateGeometryError, InsufficientDataError

DEFAULT_SIGMA = 1.0
DEFAULT_R_MIN = 0.8


@dataclass(frozen=True)
class RigidMotion:
    """Rotation by ``theta`` about the origin followed by translation.

    Maps a point ``p`` of frame t-1 to ``R(theta) p + (tx, ty)`` in frame t.
    """

    tx: float = 0.0
    ty: float = 0.0
    theta: float = 0.0

    def apply(self, pts):
        pts = np.asarray(pts, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([c * x - s * y + self.tx, s * x + c * y + self.ty], axis=-1)


@dataclass(frozen=True)
class MotionStats:
    mean_residual: float
    std_residual: float
    n_inliers: int
    n_outliers: int


def _point_pairs(assocs, prev, cur):
    prev_by = {c.label: c for c in prev}
    cur_by = {c.label: c for c in cur}
    n = len(assocs)
    p = np.empty((n, 2))
    q = np.empty((n, 2))
    for i, a in enumerate(assocs):
        c = prev_by[a.prev_label]
        p[i, 0] = c.cx
        p[i, 1] = c.cy
        c = cur_by[a.cur_label]
        q[i, 0] = c.cx
        q[i, 1] = c.cy
    return p, q


def fit_rigid(p, q):
    """Closed-form least-squares rotation + translation taking ``p`` to ``q``.

    With both point sets centred on their means, the optimal angle is
    ``atan2(sum(px*qy - py*qx), sum(px*qx + py*qy))`` and the translation
    maps the rotated mean of ``p`` onto the mean of ``q``.
    """
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    if len(p) < 2:
        raise InsufficientDataError(f"rigid fit needs at least 2 point pairs, got {len(p)}")
    if np.all(p == p[0]):
        raise DegenerateGeometryError("all source points coincide; rotation is undefined")
    return RigidMotion(*_kernels.rigid_fit(p, q))


def estimate_rigid(assocs, prev, cur):
    """Least-squares rigid motion mapping matched ``prev`` centroids onto ``cur``."""
    if len(assocs) < 2:
        raise InsufficientDataError(f"rigid fit needs at least 2 associations, got {len(assocs)}")
    return fit_rigid(*_point_pairs(assocs, prev, cur))


def _residuals(p, q, m):
    if len(p) == 0:
        return np.zeros(0)
    return _kernels.rigid_residuals(p, q, m.tx, m.ty, m.theta)


def register_residuals(assocs, prev, cur, m: RigidMotion):
    """Copies of ``assocs`` with ``residual`` set to the post-registration distance."""
    p, q = _point_pairs(assocs, prev, cur)
    res = _residuals(p, q, m)
    return [Association(*a[:5], r, a.inlier) for a, r in zip(assocs, res.tolist())]


def estimate_two_pass(assocs, prev, cur, sigma=DEFAULT_SIGMA):
    """Rigid fit with one round of outlier rejection.

    Associations whose first-pass residual exceeds ``mean + sigma * std`` are
    flagged as outliers and the motion is refitted on the rest.  Residuals are
    then recomputed for every association against the refined motion.
    """
    if len(assocs) < 2:
        raise InsufficientDataError(f"rigid fit needs at least 2 associations, got {len(assocs)}")
    p, q = _point_pairs(assocs, prev, cur)
    m1 = fit_rigid(p, q)
    r1 = _residuals(p, q, m1)
    thr = r1.mean() + sigma * r1.std()
    inl = r1 <= thr
    motion, res = m1, r1
    if inl.sum() >= 2:
        try:
            motion = fit_rigid(p[inl], q[inl])
        except DegenerateGeometryError:
            inl = np.ones(len(p), dtype=bool)
        else:
            res = _residuals(p, q, motion)
    else:
        inl = np.ones(len(p), dtype=bool)
    out = [
        Association(*a[:5], r, f)
        for a, r, f in zip(assocs, res.tolist(), inl.tolist())
    ]
    n_in = int(inl.sum())
    stats = MotionStats(float(res.mean()), float(res.std()), n_in, len(out) - n_in)
    return motion, out, stats


def classify_motion(assocs, r_min=DEFAULT_R_MIN):
    """True for each association whose residual marks it as moving."""
    return [a.residual >= r_min for a in assocs]
