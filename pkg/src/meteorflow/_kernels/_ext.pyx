# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: thresholding, labeling, k-NN matching, rigid fitting.

Every loop runs without the GIL so replicated pipeline workers can execute
these kernels concurrently.
"""
import numpy as np

from libc.math cimport atan2, cos, sin, sqrt, M_PI
from libc.stdint cimport uint8_t, int32_t, int64_t
from libc.stdlib cimport calloc, free, malloc, qsort


def binarize(const uint8_t[:, ::1] img, int low):
    cdef Py_ssize_t n = img.shape[0] * img.shape[1], i
    out = np.empty((img.shape[0], img.shape[1]), dtype=np.bool_)
    if low <= 0:
        out.fill(True)
        return out
    if low > 255:
        out.fill(False)
        return out
    cdef uint8_t[:, ::1] o = out.view(np.uint8)
    cdef const uint8_t* src = &img[0, 0]
    cdef uint8_t* dst = &o[0, 0]
    cdef uint8_t lo = <uint8_t>low
    # flat byte loop so the compiler can vectorize it
    with nogil:
        for i in range(n):
            dst[i] = src[i] >= lo
    return out


cdef inline int32_t _find(int32_t* parent, int32_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef inline int32_t _union(int32_t* parent, int32_t a, int32_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
        return a
    if b < a:
        parent[a] = b
    return b


def label(const uint8_t[:, ::1] mask, const uint8_t[:, ::1] img):
    """8-connected two-pass union-find with fused feature accumulation.

    Returns ``(labels, area, sum_x, sum_y, xmin, xmax, ymin, ymax, vmax)``;
    feature arrays are indexed by ``label - 1``.
    """
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1], y, x
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int32_t[:, ::1] lab = labels_arr
    # a new provisional label needs a background W neighbour, so a row
    # creates at most ceil(w/2) of them
    cdef Py_ssize_t cap = h * ((w + 1) // 2) + 2
    cdef int32_t* parent = <int32_t*> malloc(cap * sizeof(int32_t))
    cdef int32_t* final = <int32_t*> malloc(cap * sizeof(int32_t))
    if parent == NULL or final == NULL:
        free(parent)
        free(final)
        raise MemoryError()
    cdef int32_t nprov = 0, n = 0, cur, nb, i
    with nogil:
        parent[0] = 0
        for y in range(h):
            for x in range(w):
                if not mask[y, x]:
                    continue
                cur = 0
                if x > 0 and lab[y, x - 1]:
                    cur = lab[y, x - 1]
                if y > 0:
                    if x > 0 and lab[y - 1, x - 1]:
                        nb = lab[y - 1, x - 1]
                        cur = nb if cur == 0 else _union(parent, cur, nb)
                    if lab[y - 1, x]:
                        nb = lab[y - 1, x]
                        cur = nb if cur == 0 else _union(parent, cur, nb)
                    if x + 1 < w and lab[y - 1, x + 1]:
                        nb = lab[y - 1, x + 1]
                        cur = nb if cur == 0 else _union(parent, cur, nb)
                if cur == 0:
                    nprov += 1
                    parent[nprov] = nprov
                    cur = nprov
                lab[y, x] = cur
        # roots are the smallest provisional label of each component,
        # i.e. the one created at its first raster pixel
        for i in range(1, nprov + 1):
            if parent[i] == i:
                n += 1
                final[i] = n
            else:
                final[i] = final[_find(parent, i)]

    area_arr = np.zeros(n, dtype=np.int64)
    sx_arr = np.zeros(n, dtype=np.int64)
    sy_arr = np.zeros(n, dtype=np.int64)
    xmin_arr = np.full(n, w, dtype=np.int32)
    xmax_arr = np.full(n, -1, dtype=np.int32)
    ymin_arr = np.full(n, h, dtype=np.int32)
    ymax_arr = np.full(n, -1, dtype=np.int32)
    vmax_arr = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] area = area_arr, sx = sx_arr, sy = sy_arr
    cdef int32_t[::1] xmin = xmin_arr, xmax = xmax_arr, ymin = ymin_arr, ymax = ymax_arr
    cdef uint8_t[::1] vmax = vmax_arr
    cdef int32_t k
    with nogil:
        for y in range(h):
            for x in range(w):
                if lab[y, x] == 0:
                    continue
                k = final[lab[y, x]]
                lab[y, x] = k
                k -= 1
                area[k] += 1
                sx[k] += x
                sy[k] += y
                if x < xmin[k]:
                    xmin[k] = x
                if x > xmax[k]:
                    xmax[k] = x
                if y < ymin[k]:
                    ymin[k] = y
                if y > ymax[k]:
                    ymax[k] = y
                if img[y, x] > vmax[k]:
                    vmax[k] = img[y, x]
    free(parent)
    free(final)
    return labels_arr, area_arr, sx_arr, sy_arr, xmin_arr, xmax_arr, ymin_arr, ymax_arr, vmax_arr


cdef struct Cand:
    double d
    int32_t i
    int32_t j


cdef int _cmp_cand(const void* pa, const void* pb) noexcept nogil:
    cdef const Cand* a = <const Cand*> pa
    cdef const Cand* b = <const Cand*> pb
    if a.d < b.d:
        return -1
    if a.d > b.d:
        return 1
    if a.i != b.i:
        return -1 if a.i < b.i else 1
    if a.j != b.j:
        return -1 if a.j < b.j else 1
    return 0


cdef void _mark_nearest(const double* dist, uint8_t* near, Py_ssize_t n, Py_ssize_t m,
                        Py_ssize_t row_stride, Py_ssize_t col_stride, int k) noexcept nogil:
    # for each of n rows, flag its k nearest of m columns; ties keep the lower index
    cdef Py_ssize_t i, j, r, best
    cdef double bd, d
    cdef Py_ssize_t kk = k if k < m else m
    for i in range(n):
        for r in range(kk):
            best = -1
            bd = 0
            for j in range(m):
                if near[i * row_stride + j * col_stride]:
                    continue
                d = dist[i * row_stride + j * col_stride]
                if best < 0 or d < bd:
                    best = j
                    bd = d
            near[i * row_stride + best * col_stride] = 1


def mutual_knn(const double[::1] px, const double[::1] py, const double[::1] qx,
               const double[::1] qy, int k, double max_dist):
    """Greedy mutual-k-NN matching; returns index arrays in selection order."""
    cdef Py_ssize_t n = px.shape[0], m = qx.shape[0], i, j, nc = 0, nsel = 0
    cdef double bx, by
    if n == 0 or m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    cdef double* dist = <double*> malloc(n * m * sizeof(double))
    cdef uint8_t* nearp = <uint8_t*> calloc(n * m, 1)
    cdef uint8_t* nearq = <uint8_t*> calloc(n * m, 1)
    cdef uint8_t* usedp = <uint8_t*> calloc(n, 1)
    cdef uint8_t* usedq = <uint8_t*> calloc(m, 1)
    cdef Cand* cand = <Cand*> malloc(n * m * sizeof(Cand))
    if not (dist and nearp and nearq and usedp and usedq and cand):
        free(dist); free(nearp); free(nearq); free(usedp); free(usedq); free(cand)
        raise MemoryError()
    out_i = np.empty(min(n, m), dtype=np.int64)
    out_j = np.empty(min(n, m), dtype=np.int64)
    cdef int64_t[::1] oi = out_i, oj = out_j
    with nogil:
        for i in range(n):
            for j in range(m):
                bx = qx[j] - px[i]
                by = qy[j] - py[i]
                dist[i * m + j] = sqrt(bx * bx + by * by)
        _mark_nearest(dist, nearp, n, m, m, 1, k)
        _mark_nearest(dist, nearq, m, n, 1, m, k)
        for i in range(n):
            for j in range(m):
                if nearp[i * m + j] and nearq[i * m + j] and dist[i * m + j] <= max_dist:
                    cand[nc].d = dist[i * m + j]
                    cand[nc].i = <int32_t> i
                    cand[nc].j = <int32_t> j
                    nc += 1
        qsort(cand, nc, sizeof(Cand), _cmp_cand)
        for i in range(nc):
            if usedp[cand[i].i] or usedq[cand[i].j]:
                continue
            usedp[cand[i].i] = 1
            usedq[cand[i].j] = 1
            oi[nsel] = cand[i].i
            oj[nsel] = cand[i].j
            nsel += 1
    free(dist); free(nearp); free(nearq); free(usedp); free(usedq); free(cand)
    return out_i[:nsel], out_j[:nsel]


def rigid_fit(const double[:, ::1] p, const double[:, ::1] q):
    """Least-squares rotation+translation taking p onto q: (tx, ty, theta)."""
    cdef Py_ssize_t n = p.shape[0], i
    cdef double pmx = 0, pmy = 0, qmx = 0, qmy = 0, num = 0, den = 0
    cdef double ax, ay, bx, by, theta, c, s
    with nogil:
        for i in range(n):
            pmx += p[i, 0]
            pmy += p[i, 1]
            qmx += q[i, 0]
            qmy += q[i, 1]
        pmx /= n
        pmy /= n
        qmx /= n
        qmy /= n
        for i in range(n):
            ax = p[i, 0] - pmx
            ay = p[i, 1] - pmy
            bx = q[i, 0] - qmx
            by = q[i, 1] - qmy
            num += ax * by - ay * bx
            den += ax * bx + ay * by
        theta = atan2(num, den)
        if theta == -M_PI:
            theta = M_PI
        c = cos(theta)
        s = sin(theta)
    return qmx - (c * pmx - s * pmy), qmy - (s * pmx + c * pmy), theta


def rigid_residuals(const double[:, ::1] p, const double[:, ::1] q, double tx, double ty,
                    double theta):
    cdef Py_ssize_t n = p.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double c = cos(theta), s = sin(theta), dx, dy
    with nogil:
        for i in range(n):
            dx = c * p[i, 0] - s * p[i, 1] + tx - q[i, 0]
            dy = s * p[i, 0] + c * p[i, 1] + ty - q[i, 1]
            o[i] = sqrt(dx * dx + dy * dy)
    return out
