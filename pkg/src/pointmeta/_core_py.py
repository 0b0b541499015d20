"""Pure numpy implementations of the hot kernels.

This module mirrors the compiled extension ``pointmeta._core`` exactly: same
signatures, same results bit for bit. All distances are accumulated in float64
with a fixed per-axis order (dx*dx + dy*dy + dz*dz) so that the two backends
agree on every comparison, including ties.

Conventions shared with the compiled backend:
  - knn results are ordered by (distance, reference index).
  - ball results are the lowest-index in-radius points, padded by repeating
    the first entry; rows with zero in-radius points are left zero-filled and
    the caller substitutes the nearest reference point.
"""

from __future__ import annotations

import numpy as np

COMPILED = False

_KNN_CHUNK = 512


def _pair_d2(q64: np.ndarray, r64: np.ndarray) -> np.ndarray:
    """Squared distances (len(q), len(r)) with fixed summation order."""
    d2 = (q64[:, 0, None] - r64[None, :, 0]) ** 2
    d2 = d2 + (q64[:, 1, None] - r64[None, :, 1]) ** 2
    d2 = d2 + (q64[:, 2, None] - r64[None, :, 2]) ** 2
    return d2


def _pair_d2_generic(q64: np.ndarray, r64: np.ndarray) -> np.ndarray:
    """Squared distances for arbitrary feature dim, sequential over channels."""
    d2 = (q64[:, 0, None] - r64[None, :, 0]) ** 2
    for j in range(1, q64.shape[1]):
        d2 = d2 + (q64[:, j, None] - r64[None, :, j]) ** 2
    return d2


def _knn_chunked(q64, r64, k, pair_fn):
    m = q64.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for lo in range(0, m, _KNN_CHUNK):
        hi = min(lo + _KNN_CHUNK, m)
        d2 = pair_fn(q64[lo:hi], r64)
        # stable sort on distance keeps ascending reference index among ties
        out[lo:hi] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def brute_knn(query: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    return _knn_chunked(query.astype(np.float64), reference.astype(np.float64), k, _pair_d2)


def brute_knn_generic(query: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    return _knn_chunked(
        query.astype(np.float64), reference.astype(np.float64), k, _pair_d2_generic
    )


def _pack_rows(rows, cols, m, k_cap, idx_out):
    """Scatter (row, col) pairs, sorted by (row, col), into padded rows.

    Returns per-row true counts. Rows receiving nothing stay zero-filled.
    """
    counts = np.bincount(rows, minlength=m)
    if len(cols):
        starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
        pos = np.arange(len(cols)) - np.repeat(starts, counts)
        keep = pos < k_cap
        idx_out[rows[keep], pos[keep]] = cols[keep]
    take = np.minimum(counts, k_cap)
    pad = np.arange(k_cap)[None, :] >= np.maximum(take, 1)[:, None]
    np.copyto(idx_out, np.where(pad, idx_out[:, :1], idx_out))
    return take.astype(np.int64)


def brute_ball(query, reference, radius, k_cap):
    q64 = query.astype(np.float64)
    r64 = reference.astype(np.float64)
    m = q64.shape[0]
    r2 = float(radius) * float(radius)
    idx = np.zeros((m, k_cap), dtype=np.int64)
    counts = np.zeros(m, dtype=np.int64)
    for lo in range(0, m, _KNN_CHUNK):
        hi = min(lo + _KNN_CHUNK, m)
        d2 = _pair_d2(q64[lo:hi], r64)
        rows, cols = np.nonzero(d2 <= r2)  # row-major: ascending col per row
        counts[lo:hi] = _pack_rows(rows, cols, hi - lo, k_cap, idx[lo:hi])
    return idx, counts


def _cell_key(cells, mins, dims):
    return ((cells[:, 0] - mins[0]) * dims[1] + (cells[:, 1] - mins[1])) * dims[2] + (
        cells[:, 2] - mins[2]
    )


def grid_ball(query, reference, radius, k_cap, cell_size, mins, dims, cell_keys, starts, order):
    """Grid-accelerated ball query; results identical to brute_ball."""
    q64 = query.astype(np.float64)
    r64 = reference.astype(np.float64)
    m = q64.shape[0]
    r2 = float(radius) * float(radius)
    reach = int(np.ceil(float(radius) / float(cell_size)))
    qcells = np.floor(q64 / float(cell_size)).astype(np.int64)
    maxs = mins + dims - 1

    pair_rows = []
    pair_cols = []
    rng = range(-reach, reach + 1)
    for ox in rng:
        for oy in rng:
            for oz in rng:
                cc = qcells + np.array([ox, oy, oz], dtype=np.int64)
                inside = np.all((cc >= mins) & (cc <= maxs), axis=1)
                if not inside.any():
                    continue
                rows0 = np.flatnonzero(inside)
                key = _cell_key(cc[rows0], mins, dims)
                pos = np.searchsorted(cell_keys, key)
                hit = (pos < len(cell_keys)) & (cell_keys[np.minimum(pos, len(cell_keys) - 1)] == key)
                rows0, pos = rows0[hit], pos[hit]
                if not len(rows0):
                    continue
                s, e = starts[pos], starts[pos + 1]
                ln = e - s
                tot = int(ln.sum())
                if tot == 0:
                    continue
                base = np.repeat(s, ln) + (
                    np.arange(tot) - np.repeat(np.concatenate(([0], np.cumsum(ln)))[:-1], ln)
                )
                cand = order[base]
                qrow = np.repeat(rows0, ln)
                dq = q64[qrow]
                dr = r64[cand]
                d2 = (dq[:, 0] - dr[:, 0]) ** 2
                d2 = d2 + (dq[:, 1] - dr[:, 1]) ** 2
                d2 = d2 + (dq[:, 2] - dr[:, 2]) ** 2
                keep = d2 <= r2
                pair_rows.append(qrow[keep])
                pair_cols.append(cand[keep])

    idx = np.zeros((m, k_cap), dtype=np.int64)
    if pair_rows:
        rows = np.concatenate(pair_rows)
        cols = np.concatenate(pair_cols)
        o = np.lexsort((cols, rows))
        counts = _pack_rows(rows[o], cols[o], m, k_cap, idx)
    else:
        counts = np.zeros(m, dtype=np.int64)
    return idx, counts


def grid_knn(query, reference, k, cell_size, mins, dims, cell_keys, starts, order):
    """Grid-accelerated knn via expanding cell shells; matches brute_knn."""
    q64 = query.astype(np.float64)
    r64 = reference.astype(np.float64)
    m = q64.shape[0]
    c = float(cell_size)
    maxs = mins + dims - 1
    out = np.empty((m, k), dtype=np.int64)

    for i in range(m):
        q = q64[i]
        qc = np.floor(q / c).astype(np.int64)
        cand: list[np.ndarray] = []
        # shells below the Chebyshev gap to the occupied box are empty
        radius_cells = max(0, int(np.max(mins - qc)), int(np.max(qc - maxs)))
        while True:
            cand.extend(_shell_points(qc, radius_cells, mins, maxs, dims, cell_keys, starts, order))
            covered = bool(
                np.all(qc - radius_cells <= mins) and np.all(qc + radius_cells >= maxs)
            )
            n_cand = sum(len(a) for a in cand)
            if n_cand >= k:
                ids = np.concatenate(cand)
                dr = r64[ids]
                d2 = (q[0] - dr[:, 0]) ** 2
                d2 = d2 + (q[1] - dr[:, 1]) ** 2
                d2 = d2 + (q[2] - dr[:, 2]) ** 2
                sel = np.lexsort((ids, d2))[:k]
                kth = d2[sel[-1]]
                bound = radius_cells * c
                if covered or kth < bound * bound:
                    out[i] = ids[sel]
                    break
            elif covered:
                raise ValueError("fewer reference points than k")  # pre-checked by caller
            radius_cells += 1
    return out


def _shell_points(qc, rad, mins, maxs, dims, cell_keys, starts, order):
    """Point-id arrays for all occupied cells on the Chebyshev shell ``rad``."""
    chunks = []
    lo = qc - rad
    hi = qc + rad
    for cx in range(max(lo[0], mins[0]), min(hi[0], maxs[0]) + 1):
        on_x = cx == lo[0] or cx == hi[0]
        for cy in range(max(lo[1], mins[1]), min(hi[1], maxs[1]) + 1):
            on_y = cy == lo[1] or cy == hi[1]
            if on_x or on_y:
                z_range = range(max(lo[2], mins[2]), min(hi[2], maxs[2]) + 1)
            else:
                z_range = [z for z in (lo[2], hi[2]) if mins[2] <= z <= maxs[2]]
                if lo[2] == hi[2]:
                    z_range = z_range[:1]
            for cz in z_range:
                key = ((cx - mins[0]) * dims[1] + (cy - mins[1])) * dims[2] + (cz - mins[2])
                pos = int(np.searchsorted(cell_keys, key))
                if pos < len(cell_keys) and cell_keys[pos] == key:
                    chunks.append(order[starts[pos] : starts[pos + 1]])
    return chunks


def fps(positions: np.ndarray, m: int, start: int) -> np.ndarray:
    """Greedy farthest point sampling; ties resolved to the smaller index."""
    p = positions.astype(np.float64)
    sel = np.empty(m, dtype=np.int64)
    sel[0] = start
    dx = p[:, 0] - p[start, 0]
    dy = p[:, 1] - p[start, 1]
    dz = p[:, 2] - p[start, 2]
    best = dx * dx + dy * dy + dz * dz
    for i in range(1, m):
        nxt = int(np.argmax(best))  # first maximum = smallest index on ties
        sel[i] = nxt
        dx = p[:, 0] - p[nxt, 0]
        dy = p[:, 1] - p[nxt, 1]
        dz = p[:, 2] - p[nxt, 2]
        d2 = dx * dx + dy * dy + dz * dz
        np.minimum(best, d2, out=best)
    return sel
