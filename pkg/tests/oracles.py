"""Independent brute-force oracles for the test suite.

Everything here is written as plain loops over numpy scalars/rows, on purpose:
these definitions stay independent of the library code paths they check.
"""

import numpy as np


def matmul_triple_loop(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def softmax_naive(x, axis, temperature=1.0):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp((x - x.max(axis=axis, keepdims=True)) / temperature)
    return e / e.sum(axis=axis, keepdims=True)


def knn_bruteforce(query, reference, k):
    """(distance, index)-sorted k nearest, fully per pair."""
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    out = np.empty((len(q), k), dtype=np.int64)
    for i in range(len(q)):
        d2 = [(_d2(q[i], r[j]), j) for j in range(len(r))]
        d2.sort()
        out[i] = [j for _, j in d2[:k]]
    return out


def _d2(a, b):
    acc = 0.0
    for t in range(len(a)):
        diff = float(a[t]) - float(b[t])
        acc += diff * diff
    return acc


def ball_sets_bruteforce(query, reference, radius):
    """Uncapped in-radius index sets per query, ascending index."""
    q = np.asarray(query, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    r2 = float(radius) ** 2
    return [
        [j for j in range(len(r)) if _d2(q[i], r[j]) <= r2] for i in range(len(q))
    ]


def fps_bruteforce(points, m, start):
    """O(N^2 m) farthest point sampling recomputing all distances each step."""
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    selected = [start]
    while len(selected) < m:
        best_idx, best_min = None, -1.0
        for j in range(n):
            if j in selected:
                dmin = 0.0
            else:
                dmin = min(_d2(p[j], p[s]) for s in selected)
            if dmin > best_min:  # strict: first max wins => smallest index
                best_min, best_idx = dmin, j
        selected.append(best_idx)
    return np.asarray(selected, dtype=np.int64)


def interpolate_bruteforce(coarse_pos, coarse_feat, fine_pos, k, eps=1e-8):
    cp = np.asarray(coarse_pos, dtype=np.float64)
    cf = np.asarray(coarse_feat, dtype=np.float64)
    fp = np.asarray(fine_pos, dtype=np.float64)
    out = np.zeros((len(fp), cf.shape[1]))
    for i in range(len(fp)):
        d2 = sorted((_d2(fp[i], cp[j]), j) for j in range(len(cp)))[:k]
        w = np.array([1.0 / (d + eps) for d, _ in d2])
        w /= w.sum()
        for wt, (_, j) in zip(w, d2):
            out[i] += wt * cf[j]
    return out


def eff_pointconv_undecoupled(mj, feats, h):
    """sum_j H . vec(M_j f_j^T) computed with explicit per-neighbor loops.

    mj: (N, K, d_mid), feats: (N, K, d_in), h: (d_out, d_mid*d_in);
    vec flattens (d_mid, d_in) row-major.
    """
    n, k, d_mid = mj.shape
    d_in = feats.shape[2]
    d_out = h.shape[0]
    out = np.zeros((n, d_out))
    for i in range(n):
        for j in range(k):
            outer = np.zeros((d_mid, d_in))
            for a in range(d_mid):
                for b in range(d_in):
                    outer[a, b] = float(mj[i, j, a]) * float(feats[i, j, b])
            out[i] += h.astype(np.float64) @ outer.reshape(-1)
    return out


def kpconv_direct(relpos, feats, kernel_points, sigma, w):
    """f_i = sum_j (sum_l max(0, 1-|p_j-p_l|/sigma) W_l)^T f_j, per-pair loops."""
    n, k, _ = relpos.shape
    L, d_in, d_out = w.shape
    out = np.zeros((n, d_out))
    for i in range(n):
        for j in range(k):
            g = np.zeros((d_in, d_out))
            for l in range(L):
                dist = np.sqrt(_d2(relpos[i, j], kernel_points[l]))
                infl = max(0.0, 1.0 - dist / sigma)
                g += infl * w[l].astype(np.float64)
            out[i] += feats[i, j].astype(np.float64) @ g
    return out
