"""Pure-Python/numpy fallback for the compiled kernels.

Labeling works on horizontal runs of foreground pixels rather than on single
pixels: runs are extracted with numpy, merged with a union-find over the run
list, and features are accumulated per run.  Night-sky masks are sparse, so
the Python-level loops only see a few hundred runs per frame.
"""
import math

import numpy as np


def binarize(img, low):
    return img >= low


def _runs(mask):
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    sy, sx = np.nonzero(d == 1)
    _, ex = np.nonzero(d == -1)
    # both nonzero() calls walk row-major, so starts and ends pair up
    return sy, sx, ex - 1


def label(mask, img):
    h, w = mask.shape
    ry, rx0, rx1 = _runs(mask)
    nruns = len(ry)
    labels = np.zeros((h, w), dtype=np.int32)
    if nruns == 0:
        empty64 = np.zeros(0, dtype=np.int64)
        empty32 = np.zeros(0, dtype=np.int32)
        return (labels, empty64, empty64.copy(), empty64.copy(), empty32,
                empty32.copy(), empty32.copy(), empty32.copy(), np.zeros(0, dtype=np.uint8))

    parent = list(range(nruns))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    row_start = np.searchsorted(ry, np.arange(h + 1))
    ry_l = ry.tolist()
    x0 = rx0.tolist()
    x1 = rx1.tolist()
    for y in range(1, h):
        a, a_end = row_start[y - 1], row_start[y]
        b, b_end = row_start[y], row_start[y + 1]
        if a == a_end or b == b_end:
            continue
        # two-pointer sweep; 8-connectivity widens each run by one pixel
        while a < a_end and b < b_end:
            if x1[a] + 1 < x0[b]:
                a += 1
            elif x1[b] + 1 < x0[a]:
                b += 1
            else:
                ra, rb = find(a), find(b)
                if ra < rb:
                    parent[rb] = ra
                elif rb < ra:
                    parent[ra] = rb
                if x1[a] < x1[b]:
                    a += 1
                else:
                    b += 1

    # run order is raster order, so each root is the first run of its component
    run_label = np.empty(nruns, dtype=np.int64)
    n = 0
    for i in range(nruns):
        r = find(i)
        if r == i:
            n += 1
            run_label[i] = n
        else:
            run_label[i] = run_label[r]

    for i in range(nruns):
        labels[ry_l[i], x0[i]:x1[i] + 1] = run_label[i]

    idx = run_label - 1
    length = (rx1 - rx0 + 1).astype(np.int64)
    area = np.zeros(n, dtype=np.int64)
    np.add.at(area, idx, length)
    sum_x = np.zeros(n, dtype=np.int64)
    np.add.at(sum_x, idx, (rx0.astype(np.int64) + rx1) * length // 2)
    sum_y = np.zeros(n, dtype=np.int64)
    np.add.at(sum_y, idx, ry.astype(np.int64) * length)
    xmin = np.full(n, w, dtype=np.int32)
    np.minimum.at(xmin, idx, rx0.astype(np.int32))
    xmax = np.full(n, -1, dtype=np.int32)
    np.maximum.at(xmax, idx, rx1.astype(np.int32))
    ymin = np.full(n, h, dtype=np.int32)
    np.minimum.at(ymin, idx, ry.astype(np.int32))
    ymax = np.full(n, -1, dtype=np.int32)
    np.maximum.at(ymax, idx, ry.astype(np.int32))

    flat = np.append(np.ascontiguousarray(img).reshape(-1), np.uint8(0))
    bounds = np.empty(2 * nruns, dtype=np.int64)
    bounds[0::2] = ry.astype(np.int64) * w + rx0
    bounds[1::2] = ry.astype(np.int64) * w + rx1 + 1
    run_max = np.maximum.reduceat(flat, bounds)[0::2]
    vmax = np.zeros(n, dtype=np.uint8)
    np.maximum.at(vmax, idx, run_max)
    return labels, area, sum_x, sum_y, xmin, xmax, ymin, ymax, vmax


def _nearest(dist, k):
    """Per row, flag the ``k`` nearest columns; ties go to the lower index."""
    n = dist.shape[1]
    if k >= n:
        return np.ones(dist.shape, dtype=bool)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1:k]
    less = dist < kth
    eq = dist == kth
    room = k - np.count_nonzero(less, axis=1, keepdims=True)
    return less | (eq & (np.cumsum(eq, axis=1) <= room))


def mutual_knn(px, py, qx, qy, k, max_dist):
    if len(px) == 0 or len(qx) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    dx = qx[None, :] - px[:, None]
    dy = qy[None, :] - py[:, None]
    dist = np.sqrt(dx * dx + dy * dy)
    mutual = _nearest(dist, k) & _nearest(dist.T, k).T & (dist <= max_dist)
    ii, jj = np.nonzero(mutual)
    order = np.lexsort((jj, ii, dist[ii, jj]))
    used_i, used_j = set(), set()
    out_i, out_j = [], []
    for i, j in zip(ii[order].tolist(), jj[order].tolist()):
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        out_i.append(i)
        out_j.append(j)
    return np.array(out_i, dtype=np.int64), np.array(out_j, dtype=np.int64)


def rigid_fit(p, q):
    pm = p.mean(axis=0)
    qm = q.mean(axis=0)
    pc = p - pm
    qc = q - qm
    num = float(np.sum(pc[:, 0] * qc[:, 1] - pc[:, 1] * qc[:, 0]))
    den = float(np.sum(pc[:, 0] * qc[:, 0] + pc[:, 1] * qc[:, 1]))
    theta = math.atan2(num, den)
    if theta == -math.pi:
        theta = math.pi
    c, s = math.cos(theta), math.sin(theta)
    return (float(qm[0] - (c * pm[0] - s * pm[1])),
            float(qm[1] - (s * pm[0] + c * pm[1])),
            theta)


def rigid_residuals(p, q, tx, ty, theta):
    c, s = math.cos(theta), math.sin(theta)
    dx = c * p[:, 0] - s * p[:, 1] + tx - q[:, 0]
    dy = s * p[:, 0] + c * p[:, 1] + ty - q[:, 1]
    return np.sqrt(dx * dx + dy * dy)
