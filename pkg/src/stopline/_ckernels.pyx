# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: exact nearest-foreground transform and 8-connected labeling.

Mirrors ``stopline._pykernels`` exactly; see there for the contracts.
"""
import numpy as np
cimport numpy as cnp

from libc.math cimport sqrt
from libc.stdint cimport int64_t, int32_t, uint8_t

cnp.import_array()

cdef enum:
    NO_SITE = -1


cdef void _column_sites(Py_ssize_t r, const uint8_t[:, ::1] mask, int32_t[::1] above,
                        int32_t[::1] below, int32_t[::1] srow) noexcept nogil:
    # nearest foreground row in each column for row r; ties go to the upper row.
    # ``below`` is advanced lazily by scanning the (cache-resident) mask column.
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1], c, j
    cdef int32_t a, b
    for c in range(w):
        b = below[c]
        if b != NO_SITE and b < r:
            j = r
            while j < h and not mask[j, c]:
                j += 1
            b = <int32_t>j if j < h else NO_SITE
            below[c] = b
        if mask[r, c]:
            above[c] = r
        a = above[c]
        if a == NO_SITE or (b != NO_SITE and b - r < r - a):
            srow[c] = b
        else:
            srow[c] = a


cdef void _row_pass(Py_ssize_t r, const int32_t[::1] srow,
                    int64_t[::1] v, int64_t[::1] hv, int64_t[::1] znum, int64_t[::1] zden,
                    int32_t[::1] best_row, int32_t[::1] best_col) noexcept nogil:
    # lower envelope of parabolas (c - q)^2 + g(q)^2 with exact rational breakpoints
    cdef Py_ssize_t w = srow.shape[0]
    cdef Py_ssize_t q, c, j
    cdef Py_ssize_t k = -1, m
    cdef int64_t s_r, hq, fq, p, num, den, best_q, best_r, cand_q, cand_r
    for q in range(w):
        s_r = srow[q]
        if s_r == NO_SITE:
            continue
        hq = (s_r - r) * (s_r - r)
        fq = hq + q * q
        while k > 0:
            p = v[k]
            num = fq - (hv[k] + p * p)
            den = 2 * (q - p)
            if num * zden[k] < znum[k] * den:
                k -= 1
            else:
                break
        k += 1
        if k > 0:
            p = v[k - 1]
            znum[k] = fq - (hv[k - 1] + p * p)
            zden[k] = 2 * (q - p)
        else:
            znum[k] = -1
            zden[k] = 0
        v[k] = q
        hv[k] = hq
    m = k + 1
    k = 0
    for c in range(w):
        while k + 1 < m and znum[k + 1] < c * zden[k + 1]:
            k += 1
        best_q = v[k]
        best_r = srow[best_q]
        j = k + 1
        while j < m and znum[j] == c * zden[j]:
            cand_q = v[j]
            cand_r = srow[cand_q]
            if cand_r < best_r or (cand_r == best_r and cand_q < best_q):
                best_q = cand_q
                best_r = cand_r
            j += 1
        best_row[c] = <int32_t>best_r
        best_col[c] = <int32_t>best_q


cdef class _Sweep:
    """Per-row scratch buffers for one transform, each of length ``w``."""
    cdef const uint8_t[:, ::1] m
    cdef int32_t[::1] above, below, srow, best_row, best_col
    cdef int64_t[::1] v, hv, znum, zden

    def __init__(self, m):
        self.m = m
        w = m.shape[1]
        self.above = np.empty(w, dtype=np.int32)
        self.below = np.empty(w, dtype=np.int32)
        self.srow = np.empty(w, dtype=np.int32)
        self.best_row = np.empty(w, dtype=np.int32)
        self.best_col = np.empty(w, dtype=np.int32)
        self.v = np.empty(w, dtype=np.int64)
        self.hv = np.empty(w, dtype=np.int64)
        self.znum = np.empty(w, dtype=np.int64)
        self.zden = np.empty(w, dtype=np.int64)

    cdef void start(self) noexcept nogil:
        cdef Py_ssize_t c
        for c in range(self.m.shape[1]):
            self.above[c] = NO_SITE
            self.below[c] = -2  # forces the first scan; any value < 0 other than NO_SITE

    cdef void row(self, Py_ssize_t r) noexcept nogil:
        _column_sites(r, self.m, self.above, self.below, self.srow)
        _row_pass(r, self.srow, self.v, self.hv, self.znum, self.zden, self.best_row, self.best_col)


def nearest_site(mask):
    cdef const uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1], r, c
    cdef int32_t br, bc
    if h == 0 or w == 0 or not np.asarray(m).any():
        return tuple(np.full((h, w), NO_SITE, dtype=np.int32) for _ in range(3))
    d2_a = np.empty((h, w), dtype=np.int32)
    nrow_a = np.empty((h, w), dtype=np.int32)
    ncol_a = np.empty((h, w), dtype=np.int32)
    cdef int32_t[:, ::1] d2 = d2_a
    cdef int32_t[:, ::1] nrow = nrow_a
    cdef int32_t[:, ::1] ncol = ncol_a
    cdef _Sweep sw = _Sweep(m)
    with nogil:
        sw.start()
        for r in range(h):
            sw.row(r)
            for c in range(w):
                br = sw.best_row[c]
                bc = sw.best_col[c]
                nrow[r, c] = br
                ncol[r, c] = bc
                d2[r, c] = (c - bc) * (c - bc) + (br - r) * (br - r)
    return d2_a, nrow_a, ncol_a


def clipped_distance(mask, int d_thresh):
    cdef const uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1], r, c
    cdef int64_t dr, dc
    cdef double t = d_thresh, d
    out_a = np.zeros((h, w), dtype=np.float64)
    if h == 0 or w == 0 or not np.asarray(m).any():
        return out_a
    cdef double[:, ::1] out = out_a
    cdef _Sweep sw = _Sweep(m)
    with nogil:
        sw.start()
        for r in range(h):
            sw.row(r)
            for c in range(w):
                dr = sw.best_row[c] - r
                dc = sw.best_col[c] - c
                d = t - sqrt(<double>(dr * dr + dc * dc))
                out[r, c] = d / t if d > 0 else 0.0
    return out_a


cdef inline int32_t _find(int32_t[::1] parent, int32_t x) noexcept nogil:
    cdef int32_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline int32_t _union(int32_t[::1] parent, int32_t a, int32_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return a
    if b < a:
        a, b = b, a
    parent[b] = a
    return a


def label8(mask):
    cdef const uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1], r, c
    labels_a = np.zeros((h, w), dtype=np.int32)
    if h == 0 or w == 0:
        return labels_a, 0
    cdef int32_t[:, ::1] lab = labels_a
    # at most one provisional label per cell, plus the background slot
    cdef int32_t[::1] parent = np.zeros(h * w + 1, dtype=np.int32)
    cdef int32_t[::1] final = np.zeros(h * w + 1, dtype=np.int32)
    cdef int32_t nxt = 1, cur, n = 0
    with nogil:
        for r in range(h):
            for c in range(w):
                if not m[r, c]:
                    continue
                cur = 0
                if c > 0 and lab[r, c - 1]:
                    cur = lab[r, c - 1]
                if r > 0:
                    if c > 0 and lab[r - 1, c - 1]:
                        cur = lab[r - 1, c - 1] if cur == 0 else _union(parent, cur, lab[r - 1, c - 1])
                    if lab[r - 1, c]:
                        cur = lab[r - 1, c] if cur == 0 else _union(parent, cur, lab[r - 1, c])
                    if c + 1 < w and lab[r - 1, c + 1]:
                        cur = lab[r - 1, c + 1] if cur == 0 else _union(parent, cur, lab[r - 1, c + 1])
                if cur == 0:
                    parent[nxt] = nxt
                    cur = nxt
                    nxt += 1
                lab[r, c] = cur
        for r in range(h):
            for c in range(w):
                if lab[r, c]:
                    cur = _find(parent, lab[r, c])
                    if final[cur] == 0:
                        n += 1
                        final[cur] = n
                    lab[r, c] = final[cur]
    return labels_a, n
