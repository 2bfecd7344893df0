"""Moreau-envelope smoothing of Lipschitz components and stagewise smoothing.

The envelope ``f^(beta)(x) = min_u f(u) + beta/2 ||x - u||^2`` is
``beta``-smooth with gradient ``beta (x - prox_f(x, beta))`` and satisfies
``f^(beta) <= f <= f^(beta) + L^2/(2 beta)``. Each gradient costs one prox
query of the base component.
"""
import math

import numpy as np

from .oracle import evaluate_sum, project_ball, query
from .trace import RunTrace


class SmoothedComponent:
    """Moreau envelope of a base component at a fixed ``beta``."""

    def __init__(self, base, beta):
        if not beta > 0:
            raise ValueError("beta must be positive")
        self.base = base
        self.beta = float(beta)
        self.dim = base.dim

    def value_and_gradient(self, x, ledger=None, index=0):
        """Envelope value and gradient from one shared prox call.

        When ``ledger`` is given the prox call is recorded as a query of
        component ``index``. The value uses an out-of-band evaluation of the
        base function at the prox point.
        """
        x = np.asarray(x, dtype=float)
        u = self.base.prox(x, self.beta)
        if ledger is not None:
            ledger.record(index, self.beta, x)
        d = x - u
        return self.base.value(u) + 0.5 * self.beta * float(d @ d), self.beta * d

    def value(self, x, ledger=None, index=0):
        return self.value_and_gradient(x, ledger, index)[0]

    def gradient(self, x, ledger=None, index=0):
        return self.value_and_gradient(x, ledger, index)[1]


def moreau(component, beta):
    """Wrap ``component`` as its ``beta``-Moreau envelope."""
    return SmoothedComponent(component, beta)


class SmoothedProblem:
    """Average of the Moreau envelopes of the components of ``base``.

    Gradients go through the base problem's oracle so every one of them is a
    ledger-counted prox query. The smoothed function class has
    ``gamma = beta``, the base ``L`` and strong convexity
    ``lam * beta / (lam + beta)`` (the envelope of a ``lam``-strongly convex
    function is only that strongly convex).
    """

    def __init__(self, base, beta):
        if not beta > 0:
            raise ValueError("beta must be positive")
        self.base = base
        self.beta = float(beta)
        self.components = [SmoothedComponent(c, beta) for c in base.components]
        fc = base.fclass
        lam = fc.strong_lambda
        lam_s = lam * beta / (lam + beta) if lam > 0 else 0.0
        self.fclass = fc.replace(smooth_gamma=self.beta, strong_lambda=lam_s)
        self.m = base.m
        self.dim = base.dim
        self.gamma = self.beta
        self.lam = lam_s
        self.L = fc.lipschitz_L
        self.B = fc.radius_B

    def grad(self, x, i, ledger):
        u = query(self.base, x, i, self.beta, ledger).prox_point
        return self.beta * (x - u)

    def project(self, x):
        return project_ball(x, self.B)

    def value(self, x):
        """Smoothed objective, evaluated out of band."""
        return float(np.mean([c.value(x) for c in self.components]))

    def measure(self, x):
        """Suboptimality on the original (unsmoothed) problem."""
        return self.base.suboptimality(x)


def smooth_sum(problem, beta):
    """Smoothed-sum problem of a Lipschitz finite sum."""
    if problem.fclass.lipschitz_L is None:
        raise ValueError("smoothing needs a Lipschitz constant")
    return SmoothedProblem(problem, beta)


def beta_for_epsilon(L, eps):
    """Smoothing parameter ``L^2 / eps`` giving an ``eps/2`` smoothing gap."""
    if not (L > 0 and eps > 0):
        raise ValueError("L and eps must be positive")
    return L * L / eps


def adapt_smooth_schedule(L, eps, eps0):
    """Smoothing parameters ``(L^2/eps0) 2^t`` for ``ceil(log2(eps0/eps)) + 1`` stages."""
    stages = max(0, math.ceil(math.log2(eps0 / eps) - 1e-12)) + 1
    return [L * L / eps0 * 2.0 ** t for t in range(stages)]


def adapt_smooth(problem, eps, inner, ledger, eps0=None, x0=None, trace=None,
                 budget=None, cadence=None, target=None):
    """Stagewise smoothing for strongly convex Lipschitz sums.

    Stage ``t`` optimizes the ``beta_t``-smoothed sum with a fixed number of
    inner iterations certified (by the inner solver's linear rate) to cut
    the suboptimality by a factor of four, warm-started at the previous
    stage's output.

    Parameters
    ----------
    problem : Problem
        Strongly convex (``lam > 0``) with a Lipschitz constant.
    eps : float
    inner : SolverHandle
        Must provide ``sc_iterations`` (its rate certificate).
    ledger : QueryLedger
    eps0 : float, optional
        Bound on the initial suboptimality; defaults to ``L^2/lam``.

    Returns
    -------
    x : ndarray
    """
    fc = problem.fclass
    if not fc.strong_lambda > 0:
        raise ValueError("adapt_smooth needs a strongly convex problem")
    if fc.lipschitz_L is None:
        raise ValueError("adapt_smooth needs a Lipschitz constant")
    if getattr(inner, "sc_iterations", None) is None:
        raise ValueError("inner solver lacks a strongly convex rate certificate")
    L, lam = fc.lipschitz_L, fc.strong_lambda
    if eps0 is None:
        eps0 = L * L / lam
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    trace = trace if trace is not None else RunTrace()
    stages = adapt_smooth_schedule(L, eps, eps0)
    start = ledger.total
    for beta in stages:
        sp = SmoothedProblem(problem, beta)
        iters = inner.sc_iterations(sp)
        remaining = None if budget is None else budget - (ledger.total - start)
        if remaining is not None and remaining <= 0:
            break
        x = inner.run_iterations(sp, x, iters, ledger, trace, remaining, cadence, target)
        if trace.queries_to_target is not None and target is not None:
            break
    trace.stages = stages
    trace.final = x
    return x


def sandwich_gap(problem, beta, x):
    """``(F^(beta)(x), F(x))`` for checking the smoothing sandwich."""
    sp = SmoothedProblem(problem, beta)
    return sp.value(x), evaluate_sum(problem, x)


__all__ = ["SmoothedComponent", "SmoothedProblem", "moreau", "smooth_sum",
           "beta_for_epsilon", "adapt_smooth", "adapt_smooth_schedule", "sandwich_gap"]
