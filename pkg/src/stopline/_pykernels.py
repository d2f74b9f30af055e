"""Pure-Python kernels: exact nearest-foreground transform and 8-connected labeling.

Same contracts as the compiled ``_ckernels`` module; used when the extension
is unavailable and as a cross-check in the test suite.
"""
from __future__ import annotations

import numpy as np

NO_SITE = -1


def _column_pass(mask: np.ndarray) -> np.ndarray:
    """Row of the nearest foreground cell in the same column (ties -> upper), or -1."""
    h, w = mask.shape
    site_row = np.full((h, w), NO_SITE, dtype=np.int64)
    for c in range(w):
        col = mask[:, c].tolist()
        above = [NO_SITE] * h
        last = NO_SITE
        for r in range(h):
            if col[r]:
                last = r
            above[r] = last
        nxt = NO_SITE
        for r in range(h - 1, -1, -1):
            if col[r]:
                nxt = r
            a = above[r]
            if a == NO_SITE:
                best = nxt
            elif nxt == NO_SITE:
                best = a
            else:
                best = a if r - a <= nxt - r else nxt
            site_row[r, c] = best
    return site_row


def _row_pass(r: int, srow: list, w: int, out_row, out_col, out_d2) -> None:
    # lower envelope of parabolas (c - q)^2 + g(q)^2 with exact rational breakpoints
    v = []
    znum = []
    zden = []
    hv = []
    for q in range(w):
        s_r = srow[q]
        if s_r == NO_SITE:
            continue
        hq = (s_r - r) * (s_r - r)
        fq = hq + q * q
        while v:
            k = len(v) - 1
            p = v[k]
            num = fq - (hv[k] + p * p)
            den = 2 * (q - p)
            if k > 0 and num * zden[k] < znum[k] * den:
                v.pop()
                znum.pop()
                zden.pop()
                hv.pop()
                continue
            break
        if v:
            p = v[-1]
            znum.append(fq - (hv[-1] + p * p))
            zden.append(2 * (q - p))
        else:
            znum.append(-1)
            zden.append(0)  # sentinel: -inf
        v.append(q)
        hv.append(hq)
    m = len(v)
    if m == 0:
        return
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
        out_row[c] = best_r
        out_col[c] = best_q
        out_d2[c] = (c - best_q) * (c - best_q) + (best_r - r) * (best_r - r)


def nearest_site(mask: np.ndarray):
    """Exact Euclidean nearest foreground cell for every cell.

    Returns ``(d2, nrow, ncol)`` int32 arrays. ``d2`` is the squared distance;
    cells are -1 everywhere when the mask has no foreground. Equidistant sites
    resolve to the smallest row, then the smallest column.
    """
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = mask.shape
    d2 = np.full((h, w), -1, dtype=np.int32)
    nrow = np.full((h, w), NO_SITE, dtype=np.int32)
    ncol = np.full((h, w), NO_SITE, dtype=np.int32)
    if not mask.any():
        return d2, nrow, ncol
    site_row = _column_pass(mask)
    for r in range(h):
        out_row = [NO_SITE] * w
        out_col = [NO_SITE] * w
        out_d2 = [-1] * w
        _row_pass(r, site_row[r].tolist(), w, out_row, out_col, out_d2)
        nrow[r] = out_row
        ncol[r] = out_col
        d2[r] = out_d2
    return d2, nrow, ncol


def clipped_distance(mask: np.ndarray, d_thresh: int) -> np.ndarray:
    """``max(d_thresh - dist, 0) / d_thresh`` per cell; all zeros without foreground."""
    d2, _, _ = nearest_site(mask)
    if (d2 < 0).all():
        return np.zeros(d2.shape, dtype=np.float64)
    return np.maximum(d_thresh - np.sqrt(d2), 0.0) / d_thresh


def _find(parent: list, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def label8(mask: np.ndarray):
    """Two-pass union-find labeling under 8-connectivity.

    Returns ``(labels, n)``; background is 0 and components are numbered 1..n
    in order of their first cell in raster order.
    """
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = mask.shape
    rows = mask.tolist()
    prov = [[0] * w for _ in range(h)]
    parent = [0]
    for r in range(h):
        cur = rows[r]
        lab = prov[r]
        up = prov[r - 1] if r > 0 else None
        for c in range(w):
            if not cur[c]:
                continue
            neigh = []
            if c > 0 and lab[c - 1]:
                neigh.append(lab[c - 1])
            if up is not None:
                for cc in (c - 1, c, c + 1):
                    if 0 <= cc < w and up[cc]:
                        neigh.append(up[cc])
            if not neigh:
                new = len(parent)
                parent.append(new)
                lab[c] = new
                continue
            root = _find(parent, neigh[0])
            for n in neigh[1:]:
                other = _find(parent, n)
                if other != root:
                    if other < root:
                        root, other = other, root
                    parent[other] = root
            lab[c] = root
    final = [0] * len(parent)
    n = 0
    labels = np.zeros((h, w), dtype=np.int32)
    for r in range(h):
        lab = prov[r]
        out = [0] * w
        for c in range(w):
            if lab[c]:
                root = _find(parent, lab[c])
                if not final[root]:
                    n += 1
                    final[root] = n
                out[c] = final[root]
        labels[r] = out
    return labels, n
