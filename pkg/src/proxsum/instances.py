"""Synthetic finite sums with known optima for the upper-bound experiments."""
import math

import numpy as np

from . import kernels
from .oracle import (AbsComponent, ComponentOracle, FunctionClass, LeastSquaresComponent,
                     Problem, RegularizedComponent, evaluate_sum)


def _median_minimizer(a, lam, B):
    """Exact minimizer of ``mean |x - a_i| + lam/2 x^2`` on ``[-B, B]``."""
    a = np.sort(np.asarray(a, dtype=float))
    m = a.size
    cands = list(a) + [-B, B]
    if lam > 0:
        # stationary points between kinks: slope (2j - m)/m + lam x = 0
        for j in range(m + 1):
            cands.append(-(2.0 * j - m) / (m * lam))
    cands = np.clip(np.array(cands), -B, B)
    vals = np.abs(cands[:, None] - a[None, :]).mean(axis=1) + 0.5 * lam * cands ** 2
    j = int(np.argmin(vals))
    return float(cands[j]), float(vals[j])


def median_problem(m, B=3.0, lam=0.0, a=None):
    """``f_i(x) = |x - a_i| (+ lam/2 x^2)`` on ``[-B, B]`` with ``a`` evenly spaced in ``[0, 2]``.

    Each component is 1-Lipschitz (``1 + lam B`` with the regularizer).
    """
    a = np.linspace(0.0, 2.0, m) if a is None else np.asarray(a, dtype=float)
    comps = [AbsComponent(np.ones(1), offset=ai, radius=B) for ai in a]
    if lam > 0:
        comps = [RegularizedComponent(c, lam, radius=B) for c in comps]
    xs, fs = _median_minimizer(a, lam, B)
    fc = FunctionClass(lipschitz_L=1.0 + lam * B, strong_lambda=lam, radius_B=B)
    prob = Problem(comps, fc, optimum=(np.array([xs]), fs), name="median",
                   meta={"a": a})
    prob.eps0 = evaluate_sum(prob, np.zeros(1)) - fs
    return prob


def least_squares_problem(m, d, kappa=100.0, seed=0, ridge=None, radius=None):
    """Ridge least squares ``f_i = (<a_i, x> - b_i)^2/2 + lam/2 ||x||^2``.

    Rows ``a_i`` are unit vectors, so each component is ``(1 + lam)``-smooth;
    ``lam`` is chosen so that ``gamma/lam = kappa`` unless ``ridge`` is given.
    The optimum comes from a direct linear solve.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.standard_normal((m, d))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    b = A @ rng.standard_normal(d) + 0.1 * rng.standard_normal(m)
    lam = ridge if ridge is not None else 1.0 / (kappa - 1.0)
    comps = [RegularizedComponent(LeastSquaresComponent(A[i:i + 1], b[i:i + 1]), lam,
                                  radius=radius) for i in range(m)]
    H = A.T @ A / m + lam * np.eye(d)
    xs = np.linalg.solve(H, A.T @ b / m)
    fc = FunctionClass(smooth_gamma=1.0 + lam, strong_lambda=lam, radius_B=radius)
    prob = Problem(comps, fc, name="least_squares", reference=True, meta={"A": A, "b": b})
    prob.optimum = (xs, evaluate_sum(prob, xs))
    prob.eps0 = evaluate_sum(prob, np.zeros(d)) - prob.optimum[1]
    return prob


class ChainQuadraticComponent(ComponentOracle):
    """``gamma/8 (x_1^2 + sum_j (x_j - x_{j+1})^2 + x_d^2) - gamma/4 x_1 + <c, x>``.

    Its Hessian is tridiagonal, so the prox is one tridiagonal solve.
    """

    def __init__(self, d, gamma, shift):
        self.dim = d
        self.gamma = float(gamma)
        self.shift = np.asarray(shift, dtype=float)
        self.radius = None
        lin = self.shift.copy()
        lin[0] -= gamma / 4.0
        self.lin = lin

    def _hess_vec(self, x):
        s = self.gamma / 4.0
        h = 2.0 * s * x
        h[:-1] -= s * x[1:]
        h[1:] -= s * x[:-1]
        return h

    def value(self, x):
        return 0.5 * float(x @ self._hess_vec(x)) + float(self.lin @ x)

    def subgradient(self, x):
        return self._hess_vec(np.asarray(x, dtype=float)) + self.lin

    def _prox(self, x, beta):
        s = self.gamma / 4.0
        d = self.dim
        diag = np.full(d, 2.0 * s + beta)
        off = np.full(d - 1, -s)
        return kernels.tridiag_solve(off, diag, off, beta * x - self.lin)


def smooth_chain_problem(m, d=2000, gamma=1.0, seed=0, spread=0.1):
    """Sum of shifted copies of the worst-case quadratic chain for gradient methods.

    Shifts have zero mean, so ``F`` is the plain chain with minimizer
    ``x*_j = 1 - j/(d+1)`` and ``F* = gamma/8 (-1 + 1/(d+1))``. Each
    component is ``gamma``-smooth; the domain is unconstrained.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    C = rng.standard_normal((m, d)) * spread / math.sqrt(d)
    C -= C.mean(axis=0)
    comps = [ChainQuadraticComponent(d, gamma, C[i]) for i in range(m)]
    j = np.arange(1, d + 1)
    xs = 1.0 - j / (d + 1.0)
    fs = gamma / 8.0 * (-1.0 + 1.0 / (d + 1.0))
    fc = FunctionClass(smooth_gamma=gamma)
    prob = Problem(comps, fc, optimum=(xs, fs), name="smooth_chain",
                   meta={"radius_to_opt": float(np.linalg.norm(xs))})
    prob.eps0 = evaluate_sum(prob, np.zeros(d)) - fs
    return prob


class DiagonalQuadraticComponent(ComponentOracle):
    """``1/2 sum_j h_j (x_j - s_j)^2 + <c, x>``."""

    def __init__(self, h, center, shift):
        self.h = np.asarray(h, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.shift = np.asarray(shift, dtype=float)
        self.dim = self.h.size
        self.radius = None

    def value(self, x):
        d = x - self.center
        return 0.5 * float(self.h @ (d * d)) + float(self.shift @ x)

    def subgradient(self, x):
        return self.h * (np.asarray(x, dtype=float) - self.center) + self.shift

    def _prox(self, x, beta):
        return (beta * x + self.h * self.center - self.shift) / (beta + self.h)


def spectral_quadratic_problem(m, d=200, gamma=1.0, cond=1e8, seed=0, spread=0.1):
    """Quadratic sum whose gap under accelerated methods decays like ``1/k^2``.

    Curvatures are log-spaced in ``[gamma/cond, gamma]`` and the minimizer has
    constant coordinates, so the spectral mass ``sum_{h_j <= t} h_j x*_j^2``
    grows linearly in ``t``; the accelerated rate ``gamma R^2/k^2`` is then
    attained up to constants until ``k ~ sqrt(cond)``. Components add
    zero-mean linear shifts and are ``gamma``-smooth.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    h = gamma * np.logspace(0.0, -math.log10(cond), d)
    xs = np.full(d, 1.0 / math.sqrt(d))
    C = rng.standard_normal((m, d)) * spread / math.sqrt(d)
    C -= C.mean(axis=0)
    comps = [DiagonalQuadraticComponent(h, xs, C[i]) for i in range(m)]
    prob = Problem(comps, FunctionClass(smooth_gamma=gamma), name="spectral_quadratic")
    prob.optimum = (xs, evaluate_sum(prob, xs))
    prob.eps0 = evaluate_sum(prob, np.zeros(d)) - prob.optimum[1]
    return prob


FAMILIES = {
    "median": median_problem,
    "least_squares": least_squares_problem,
    "smooth_chain": smooth_chain_problem,
    "spectral_quadratic": spectral_quadratic_problem,
}
