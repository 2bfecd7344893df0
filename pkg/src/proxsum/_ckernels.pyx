# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


cdef double _crossing(double[::1] xs, double[::1] sl, double[::1] ic,
                      Py_ssize_t n, double theta):
    cdef Py_ssize_t s
    cdef double end, left_limit, right_value, z
    for s in range(n):
        if s + 1 < n:
            end = xs[s + 1]
            left_limit = sl[s] * end + ic[s]
            if theta < left_limit:
                z = (theta - ic[s]) / sl[s]
                if s > 0 and z < xs[s]:
                    z = xs[s]
                return z
            right_value = sl[s + 1] * end + ic[s + 1]
            if theta <= right_value:
                return end
        else:
            z = (theta - ic[s]) / sl[s]
            if s > 0 and z < xs[s]:
                z = xs[s]
            return z
    return 0.0


def chain_tv_prox(y, double w_anchor, double anchor, w, double beta):
    """Exact prox of an anchored weighted fused-lasso chain (compiled)."""
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    cdef Py_ssize_t cap = 2 * n + 8
    cdef double[::1] xs = np.empty(cap)
    cdef double[::1] sl = np.empty(cap)
    cdef double[::1] ic = np.empty(cap)
    cdef double[::1] nxs = np.empty(cap)
    cdef double[::1] nsl = np.empty(cap)
    cdef double[::1] nic = np.empty(cap)
    cdef double[::1] lo = np.zeros(n)
    cdef double[::1] hi = np.zeros(n)
    cdef double[::1] z = out
    cdef Py_ssize_t cnt = 1, ncnt, j, s, pos
    cdef double wj, zm, zp, start, end, v
    xs[0] = -INFINITY
    sl[0] = 0.0
    ic[0] = 0.0
    for j in range(n):
        if j > 0:
            wj = wv[j - 1]
            zm = _crossing(xs, sl, ic, cnt, -wj)
            zp = _crossing(xs, sl, ic, cnt, wj)
            lo[j] = zm
            hi[j] = zp
            nxs[0] = -INFINITY
            nsl[0] = 0.0
            nic[0] = -wj
            ncnt = 1
            for s in range(cnt):
                start = xs[s] if xs[s] > zm else zm
                end = xs[s + 1] if s + 1 < cnt else INFINITY
                if end > zp:
                    end = zp
                if start < end:
                    nxs[ncnt] = start
                    nsl[ncnt] = sl[s]
                    nic[ncnt] = ic[s]
                    ncnt += 1
            nxs[ncnt] = zp
            nsl[ncnt] = 0.0
            nic[ncnt] = wj
            ncnt += 1
            xs, nxs = nxs, xs
            sl, nsl = nsl, sl
            ic, nic = nic, ic
            cnt = ncnt
        for s in range(cnt):
            sl[s] += beta
            ic[s] -= beta * yv[j]
        if j == 0 and w_anchor > 0.0:
            pos = cnt
            for s in range(1, cnt):
                if xs[s] >= anchor:
                    pos = s
                    break
            if not (pos < cnt and xs[pos] == anchor):
                for s in range(cnt, pos, -1):
                    xs[s] = xs[s - 1]
                    sl[s] = sl[s - 1]
                    ic[s] = ic[s - 1]
                xs[pos] = anchor
                sl[pos] = sl[pos - 1]
                ic[pos] = ic[pos - 1]
                cnt += 1
            for s in range(cnt):
                if s < pos:
                    ic[s] -= w_anchor
                else:
                    ic[s] += w_anchor
    z[n - 1] = _crossing(xs, sl, ic, cnt, 0.0)
    for j in range(n - 1, 0, -1):
        v = z[j]
        if v < lo[j]:
            v = lo[j]
        elif v > hi[j]:
            v = hi[j]
        z[j - 1] = v
    return out


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas algorithm for a tridiagonal system (compiled)."""
    cdef double[::1] a = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] cc = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0], i
    out = np.empty(n)
    if n == 0:
        return out
    cdef double[::1] c = np.zeros(n)
    cdef double[::1] d = np.zeros(n)
    cdef double[::1] x = out
    cdef double denom = b[0]
    c[0] = cc[0] / denom if n > 1 else 0.0
    d[0] = r[0] / denom
    for i in range(1, n):
        denom = b[i] - a[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = cc[i] / denom
        d[i] = (r[i] - a[i - 1] * d[i - 1]) / denom
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return out


def mgs_orthogonalize(basis, Py_ssize_t count, v):
    """Two-pass modified Gram-Schmidt against ``basis[:count]`` (compiled)."""
    cdef double[:, ::1] Q = np.ascontiguousarray(basis, dtype=np.float64)
    res = np.array(v, dtype=np.float64, copy=True)
    cdef double[::1] r = res
    cdef Py_ssize_t d = r.shape[0], p, q, i
    cdef double dot, nrm = 0.0
    for p in range(2):
        for q in range(count):
            dot = 0.0
            for i in range(d):
                dot += Q[q, i] * r[i]
            for i in range(d):
                r[i] -= dot * Q[q, i]
    for i in range(d):
        nrm += r[i] * r[i]
    return res, sqrt(nrm)
