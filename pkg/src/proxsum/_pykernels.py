"""Pure-Python reference implementations of the hot numerical kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable or ``PROXSUM_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np


def _crossing(xs, sl, ic, n, theta):
    """Point where a strictly increasing piecewise-linear map meets ``theta``.

    Segment ``s`` covers ``[xs[s], xs[s+1])`` with value ``sl[s]*z + ic[s]``.
    The first segment extends to minus infinity and the last to plus
    infinity. Jumps between segments count as vertical pieces.
    """
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
    raise RuntimeError("unreachable")


def chain_tv_prox(y, w_anchor, anchor, w, beta):
    """Exact prox of an anchored weighted fused-lasso chain.

    Minimizes over ``z`` in R^n::

        beta/2 * ||z - y||^2 + w_anchor*|z[0] - anchor|
            + sum_{j>=1} w[j-1] * |z[j-1] - z[j]|

    by dynamic programming over derivative messages.

    Parameters
    ----------
    y : ndarray, shape (n,)
    w_anchor : float
        Nonnegative weight of the anchor term.
    anchor : float
    w : ndarray, shape (n-1,)
        Nonnegative fused weights.
    beta : float
        Positive quadratic weight.

    Returns
    -------
    ndarray, shape (n,)
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n == 0:
        return y.copy()
    # segment lists of the current message derivative
    xs = [-math.inf]
    sl = [0.0]
    ic = [0.0]
    lo = [0.0] * n
    hi = [0.0] * n
    for j in range(n):
        if j > 0:
            wj = float(w[j - 1])
            cnt = len(xs)
            zm = _crossing(xs, sl, ic, cnt, -wj)
            zp = _crossing(xs, sl, ic, cnt, wj)
            lo[j] = zm
            hi[j] = zp
            nxs, nsl, nic = [-math.inf], [0.0], [-wj]
            # middle part copied from old message on [zm, zp)
            for s in range(cnt):
                start = max(xs[s], zm)
                end = min(xs[s + 1] if s + 1 < cnt else math.inf, zp)
                if start < end:
                    nxs.append(start)
                    nsl.append(sl[s])
                    nic.append(ic[s])
            nxs.append(zp)
            nsl.append(0.0)
            nic.append(wj)
            xs, sl, ic = nxs, nsl, nic
        for s in range(len(xs)):
            sl[s] += beta
            ic[s] -= beta * y[j]
        if j == 0 and w_anchor > 0.0:
            cnt = len(xs)
            pos = cnt
            for s in range(1, cnt):
                if xs[s] >= anchor:
                    pos = s
                    break
            if pos < cnt and xs[pos] == anchor:
                pass
            else:
                xs.insert(pos, anchor)
                sl.insert(pos, sl[pos - 1])
                ic.insert(pos, ic[pos - 1])
            for s in range(len(xs)):
                if s < pos:
                    ic[s] -= w_anchor
                else:
                    ic[s] += w_anchor
    z = np.empty(n)
    z[n - 1] = _crossing(xs, sl, ic, len(xs), 0.0)
    for j in range(n - 1, 0, -1):
        v = z[j]
        if v < lo[j]:
            v = lo[j]
        elif v > hi[j]:
            v = hi[j]
        z[j - 1] = v
    return z


def tridiag_solve(lower, diag, upper, rhs):
    """Thomas algorithm for a tridiagonal system.

    Parameters
    ----------
    lower, upper : ndarray, shape (n-1,)
        Sub- and super-diagonal.
    diag : ndarray, shape (n,)
    rhs : ndarray, shape (n,)

    Returns
    -------
    ndarray, shape (n,)
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[0]
    c = np.zeros(n)
    d = np.zeros(n)
    if n == 0:
        return d
    denom = diag[0]
    c[0] = upper[0] / denom if n > 1 else 0.0
    d[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def mgs_orthogonalize(basis, count, v):
    """Two-pass modified Gram-Schmidt of ``v`` against ``basis[:count]``.

    Parameters
    ----------
    basis : ndarray, shape (capacity, d)
        Rows are orthonormal vectors.
    count : int
        Number of valid rows.
    v : ndarray, shape (d,)

    Returns
    -------
    residual : ndarray, shape (d,)
        Component of ``v`` orthogonal to the basis (not normalized).
    norm : float
    """
    r = np.array(v, dtype=float, copy=True)
    for _ in range(2):
        for q in range(count):
            row = basis[q]
            r -= (row @ r) * row
    return r, float(math.sqrt(r @ r))
