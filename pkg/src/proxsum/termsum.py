"""Sums of scalar convex pieces composed with linear maps.

A :class:`TermSum` represents

    T(z) = sum_j w_j * kappa_j(<a_j, z> - off_j) + <lin, z> + mu/2 ||z||^2 + const

with ``kappa`` one of ``|s|``, ``psi_c(s) = max(0, |s| - c)``, the piecewise
quadratic ``phi_c`` or ``s^2``. It provides values, subgradients,
subdifferential generators and an exact brute-force prox (conic rough solve
followed by an active-set KKT polish). The hard instances use it as the
single definition of their components; the fast prox kernels are validated
against :meth:`TermSum.brute_prox`.
"""
import itertools

import numpy as np

from .oracle import ComponentOracle, ball_prox

ABS, PSI, PHI, SQ = 0, 1, 2, 3


def psi(c, z):
    """``psi_c(z) = max(0, |z| - c)`` and its subgradient (0 on ``|z| <= c``)."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    val = np.maximum(0.0, a - c)
    g = np.where(a > c, np.sign(z), 0.0)
    return val, g


def phi(c, z):
    """Piecewise quadratic ``phi_c`` and its derivative.

    ``0`` on ``|z| <= c``, ``2(|z| - c)^2`` on ``c < |z| <= 2c`` and
    ``z^2 - 2c^2`` beyond.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    mid = 2.0 * (a - c) ** 2
    out = z * z - 2.0 * c * c
    val = np.where(a <= c, 0.0, np.where(a <= 2 * c, mid, out))
    d = np.where(a <= c, 0.0, np.where(a <= 2 * c, 4.0 * (a - c) * np.sign(z), 2.0 * z))
    return val, d


def _kappa(kind, c, s):
    v = np.empty_like(s)
    g = np.empty_like(s)
    m = kind == ABS
    v[m] = np.abs(s[m])
    g[m] = np.sign(s[m])
    m = kind == PSI
    v[m], g[m] = psi(c[m], s[m])
    m = kind == PHI
    v[m], g[m] = phi(c[m], s[m])
    m = kind == SQ
    v[m] = s[m] ** 2
    g[m] = 2.0 * s[m]
    return v, g


# Pieces as (lo, hi, q, l, k0, is_kink): kappa = q s^2 + l s + k0 on [lo, hi].
def _pieces(kind, c):
    inf = np.inf
    if kind == ABS or (kind == PSI and c == 0.0):
        return [(-inf, 0.0, 0.0, -1.0, 0.0, False), (0.0, 0.0, 0, 0, 0, True),
                (0.0, inf, 0.0, 1.0, 0.0, False)]
    if kind == PSI:
        return [(-inf, -c, 0.0, -1.0, -c, False), (-c, -c, 0, 0, 0, True),
                (-c, c, 0.0, 0.0, 0.0, False), (c, c, 0, 0, 0, True),
                (c, inf, 0.0, 1.0, -c, False)]
    if kind == PHI:
        return [(-inf, -2 * c, 1.0, 0.0, -2 * c * c, False),
                (-2 * c, -c, 2.0, 4 * c, 2 * c * c, False),
                (-c, c, 0.0, 0.0, 0.0, False),
                (c, 2 * c, 2.0, -4 * c, 2 * c * c, False),
                (2 * c, inf, 1.0, 0.0, -2 * c * c, False)]
    return [(-inf, inf, 1.0, 0.0, 0.0, False)]


class TermSum:
    """Weighted sum of scalar convex pieces of linear forms.

    Parameters
    ----------
    n : int
        Coordinate dimension.
    """

    def __init__(self, n, mu=0.0, const=0.0):
        self.n = n
        self.mu = float(mu)
        self.const = float(const)
        self.lin = np.zeros(n)
        self._rows = []
        self._cvx = None
        self._frozen = None

    def add(self, kind, weight, coef, offset=0.0, c=0.0):
        """Add ``weight * kappa(<coef, z> - offset)``; ``coef`` is a dict or array."""
        if weight == 0.0:
            return self
        a = np.zeros(self.n)
        if isinstance(coef, dict):
            for k, v in coef.items():
                a[k] += v
        else:
            a[:] = coef
        self._rows.append((kind, float(weight), a, float(offset), float(c)))
        self._frozen = None
        self._cvx = None
        return self

    def add_linear(self, coef):
        self.lin = self.lin + np.asarray(coef, dtype=float)
        return self

    def _arrays(self):
        if self._frozen is None:
            p = len(self._rows)
            A = np.zeros((p, self.n))
            kind = np.zeros(p, dtype=int)
            w = np.zeros(p)
            off = np.zeros(p)
            c = np.zeros(p)
            for j, (kd, wt, a, o, cc) in enumerate(self._rows):
                A[j], kind[j], w[j], off[j], c[j] = a, kd, wt, o, cc
            self._frozen = (A, kind, w, off, c)
        return self._frozen

    def value(self, z):
        A, kind, w, off, c = self._arrays()
        s = A @ z - off
        v, _ = _kappa(kind, c, s)
        return float(w @ v + self.lin @ z + 0.5 * self.mu * (z @ z) + self.const)

    def gradient(self, z):
        A, kind, w, off, c = self._arrays()
        s = A @ z - off
        _, g = _kappa(kind, c, s)
        return A.T @ (w * g) + self.lin + self.mu * z

    def hessian_vector(self, z, h):
        """Curvature along ``h``: one-sided second derivative of ``T(z + s h)`` at ``s = 0+``.

        Absolute-value and dead-zone terms contribute nothing (they are
        piecewise linear); quadratic pieces of ``phi_c`` contribute 4 or 2.
        """
        A, kind, w, off, c = self._arrays()
        s = A @ z - off
        ds = A @ h
        # nudge along h so a breakpoint picks the piece entered in that direction
        a = np.abs(s + np.sign(ds) * 1e-12 * np.maximum(c, 1.0))
        curv = np.zeros_like(s)
        curv[kind == SQ] = 2.0
        m = kind == PHI
        curv[m] = np.where(a[m] <= c[m], 0.0, np.where(a[m] <= 2 * c[m], 4.0, 2.0))
        return A.T @ (w * curv * ds) + self.mu * h

    def subdifferential(self, z, tol=1e-10):
        """``(g0, G)`` with ``dT(z) = {g0 + G s : s in [-1, 1]^p}``."""
        A, kind, w, off, c = self._arrays()
        s = A @ z - off
        _, g = _kappa(kind, c, s)
        gw = w * g
        cols = []
        scale = tol * max(1.0, float(np.abs(z).max(initial=0.0)))
        for j in range(len(w)):
            if kind[j] == ABS or (kind[j] == PSI and c[j] == 0.0):
                if abs(s[j]) <= scale:
                    gw[j] = 0.0
                    cols.append(w[j] * A[j])
            elif kind[j] == PSI and abs(abs(s[j]) - c[j]) <= scale:
                sg = 1.0 if s[j] > 0 else -1.0
                gw[j] = 0.5 * w[j] * sg
                cols.append(0.5 * w[j] * A[j])
        g0 = A.T @ gw + self.lin + self.mu * z
        G = np.array(cols).T if cols else np.zeros((self.n, 0))
        return g0, G

    # brute-force prox ---------------------------------------------------
    def _cvx_problem(self):
        if self._cvx is None:
            import cvxpy as cp

            A, kind, w, off, c = self._arrays()
            z = cp.Variable(self.n)
            bp = cp.Parameter(nonneg=True)
            p = cp.Parameter(self.n)
            expr = 0.5 * bp * cp.sum_squares(z) - p @ z
            if self.mu:
                expr = expr + 0.5 * self.mu * cp.sum_squares(z)
            expr = expr + self.lin @ z
            for j in range(len(w)):
                s = A[j] @ z - off[j]
                if kind[j] == ABS:
                    expr = expr + w[j] * cp.abs(s)
                elif kind[j] == PSI:
                    expr = expr + w[j] * cp.pos(cp.abs(s) - c[j])
                elif kind[j] == PHI:
                    t = cp.pos(cp.abs(s) - c[j])
                    expr = expr + w[j] * (cp.square(t) + cp.huber(t, c[j]))
                else:
                    expr = expr + w[j] * cp.square(s)
            self._cvx = (cp.Problem(cp.Minimize(expr)), z, bp, p)
        return self._cvx

    def _rough_prox(self, y, beta):
        prob, z, bp, p = self._cvx_problem()
        bp.value = beta
        p.value = beta * y
        try:
            prob.solve(solver="CLARABEL", tol_gap_abs=1e-11, tol_gap_rel=1e-11,
                       tol_feas=1e-11)
        except Exception:
            prob.solve(solver="SCS", eps=1e-9)
        return np.asarray(z.value, dtype=float)

    def _kkt(self, y, beta, states):
        A, kind, w, off, c = self._arrays()
        H = (beta + self.mu) * np.eye(self.n)
        g = self.lin - beta * y
        E, e = [], []
        for j, st in enumerate(states):
            lo, hi, q, l, _, kink = st
            if kink:
                E.append(A[j])
                e.append(off[j] + lo)
                continue
            H += 2.0 * w[j] * q * np.outer(A[j], A[j])
            g += w[j] * (l - 2.0 * q * off[j]) * A[j]
        if not E:
            return np.linalg.solve(H, -g)
        E = np.array(E)
        k = E.shape[0]
        K = np.block([[H, E.T], [E, np.zeros((k, k))]])
        rhs = np.concatenate([-g, e])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        return sol[: self.n]

    def prox_residual(self, y, beta, z):
        """Min-norm element of ``dT(z) + beta(z - y)``."""
        from scipy.optimize import lsq_linear

        g0, G = self.subdifferential(z)
        r0 = g0 + beta * (z - y)
        if G.shape[1] == 0:
            return float(np.linalg.norm(r0))
        sol = lsq_linear(G, -r0, bounds=(-1.0, 1.0), method="bvls", tol=1e-14)
        return float(np.linalg.norm(r0 + G @ sol.x))

    def brute_prox(self, y, beta, tau=1e-5, max_combos=4096):
        """Exact ``argmin_z T(z) + beta/2 ||z - y||^2``.

        A conic solve locates the active pieces approximately; each
        consistent assignment of pieces is then solved exactly through its
        KKT system and the candidate with the smallest optimality residual
        is returned.
        """
        y = np.asarray(y, dtype=float)
        A, kind, w, off, c = self._arrays()
        if len(w) == 0:
            return (beta * y - self.lin) / (beta + self.mu)
        z0 = self._rough_prox(y, beta)
        s = A @ z0 - off
        options = []
        for j in range(len(w)):
            pcs = _pieces(kind[j], c[j])
            near = [p for p in pcs if p[0] - tau <= s[j] <= p[1] + tau]
            kinks = [p for p in near if p[5]]
            options.append(kinks + [p for p in near if not p[5]] if kinks else near)
        best, best_res = z0, self.prox_residual(y, beta, z0)
        scale = 1e-12 * max(1.0, beta * float(np.abs(y).max(initial=0.0)))
        for count, states in enumerate(itertools.product(*options)):
            if count >= max_combos:
                break
            z = self._kkt(y, beta, states)
            r = self.prox_residual(y, beta, z)
            if r < best_res:
                best, best_res = z, r
            if best_res <= scale:
                break
        return best


class SubspaceComponent(ComponentOracle):
    """``f(x) = T(V x) + mu/2 ||x||^2`` with ``V`` having orthonormal rows.

    Parameters
    ----------
    V : ndarray, shape (n, d)
    termsum : TermSum
        Defined on the ``n`` coordinates ``z = V x`` (its own ``mu`` must be 0).
    mu : float
    radius : float or None
    fast_prox : callable or None
        ``fast_prox(z, beta) -> z'`` giving the exact prox of ``T`` in
        coordinates; defaults to the brute-force solver.
    """

    def __init__(self, V, termsum, mu=0.0, radius=None, fast_prox=None, dim=None):
        self.V = np.asarray(V, dtype=float)
        self.dim = self.V.shape[1] if dim is None else dim
        self.ts = termsum
        self.mu = float(mu)
        self.radius = radius
        self.fast_prox = fast_prox

    def value(self, x):
        return self.ts.value(self.V @ x) + 0.5 * self.mu * float(x @ x)

    def subgradient(self, x):
        return self.V.T @ self.ts.gradient(self.V @ x) + self.mu * np.asarray(x, dtype=float)

    def subdifferential(self, x):
        g0, G = self.ts.subdifferential(self.V @ x)
        return self.V.T @ g0 + self.mu * np.asarray(x, dtype=float), self.V.T @ G

    def _coord_prox(self, x, beta, solver):
        y = beta * x / (beta + self.mu)
        bb = beta + self.mu
        z = self.V @ y
        zp = solver(z, bb)
        return y + self.V.T @ (zp - z)

    def _prox(self, x, beta):
        solver = self.fast_prox if self.fast_prox is not None else self.ts.brute_prox
        return self._coord_prox(x, beta, solver)

    def brute_prox(self, x, beta):
        """Prox through the brute-force coordinate solver (validation only)."""
        x = np.asarray(x, dtype=float)
        return ball_prox(lambda v, b: self._coord_prox(v, b, self.ts.brute_prox),
                         x, beta, self.radius)
