"""First-order and prox-based solvers for finite sums.

Every solver runs against an oracle ledger and stops before the budget
would be exceeded. Iterates are kept in the ball domain when the problem
has a radius. Randomized solvers draw from a counter-based Philox stream so
runs are reproducible bit for bit.
"""
from dataclasses import dataclass, replace
import math

import numpy as np

from .oracle import (FunctionClass, Problem, QueryLedger, RegularizedComponent)
from .smoothing import adapt_smooth, smooth_sum
from .trace import Recorder, RunTrace, as_view


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Parameters
    ----------
    budget : int
        Maximum number of oracle queries.
    seed : int
        64-bit seed for randomized solvers.
    step : float, optional
        Step-size override (absolute).
    epoch_length : int, optional
        SVRG inner-loop length (default ``2m``).
    kappa : float, optional
        Catalyst proximal weight (default ``max(0, gamma/m - lam)``).
    inner_epochs : int, optional
        SVRG epochs per Catalyst stage.
    inner_step_scale : float
        Catalyst inner SVRG step as a multiple of ``1/gamma_sub``.
    cadence : int, optional
        Queries between suboptimality measurements (default ``ceil(budget/200)``).
    target : float, optional
        Stop once the measured suboptimality is at most this value.
    """

    budget: int = 10_000
    seed: int = 0
    step: float | None = None
    epoch_length: int | None = None
    kappa: float | None = None
    inner_epochs: int | None = None
    inner_step_scale: float = 0.3
    cadence: int | None = None
    target: float | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def _setup(problem, config, x0, ledger, trace, measure=None):
    view = as_view(problem)
    if ledger is None:
        ledger = QueryLedger(view.m, keep_points=False)
    x = np.zeros(view.dim) if x0 is None else np.array(x0, dtype=float)
    x = view.project(x)
    rec = Recorder(view, ledger, config.budget, config.cadence, config.target,
                   measure=measure, trace=trace)
    rec.checkpoint(x, force=True)
    return view, ledger, x, rec


def _full_grad(view, x, ledger):
    g = np.zeros(view.dim)
    for i in range(view.m):
        g += view.grad(x, i, ledger)
    return g / view.m


# gradient descent ---------------------------------------------------------
def _gd_loop(view, x, rec, step, max_iters=None):
    k = 0
    while max_iters is None or k < max_iters:
        if not rec.affordable(view.m):
            return x, "budget_exhausted"
        x = view.project(x - step * _full_grad(view, x, rec.ledger))
        k += 1
        if rec.checkpoint(x):
            return x, "target_reached"
    return x, "iterations_done"


def gd(problem, config, x0=None, ledger=None, trace=None):
    """Projected gradient descent with step ``1/gamma``; ``m`` queries per step."""
    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace)
    if view.gamma is None:
        raise ValueError("gradient descent needs a smoothness constant")
    step = config.step if config.step is not None else 1.0 / view.gamma
    x, status = _gd_loop(view, x, rec, step)
    return rec.finish(x, status)


def subgradient_descent(problem, config, x0=None, ledger=None, trace=None):
    """Projected full-subgradient descent for Lipschitz sums.

    Steps ``B/(L sqrt(t))``; ``m`` queries per step. Returns the running
    average of the iterates, which carries the ``LB/sqrt(T)`` guarantee.
    """
    view = as_view(problem)
    if view.L is None or view.B is None:
        raise ValueError("subgradient descent needs a Lipschitz constant and a radius")
    state = {"avg": None}

    def measure(x):
        # the first checkpoint precedes any averaging
        return view.measure(x if state["avg"] is None else state["avg"])

    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace, measure=measure)
    state["avg"] = x.copy()
    total = np.zeros(view.dim)
    scale = config.step if config.step is not None else 1.0
    t = 0
    status = "budget_exhausted"
    while rec.affordable(view.m):
        t += 1
        g = _full_grad(view, x, ledger)
        total += x
        state["avg"] = total / t
        x = view.project(x - scale * view.B / (view.L * math.sqrt(t)) * g)
        if rec.checkpoint(state["avg"]):
            status = "target_reached"
            break
    return rec.finish(state["avg"], status)


# accelerated gradient descent -------------------------------------------
def _agd_loop(view, x, rec, step, max_iters=None):
    y = x.copy()
    lam = view.lam or 0.0
    if lam > 0:
        rk = math.sqrt(view.gamma / lam)
        mom_const = (rk - 1.0) / (rk + 1.0)
    t = 1.0
    k = 0
    while max_iters is None or k < max_iters:
        if not rec.affordable(view.m):
            return x, "budget_exhausted"
        x_new = view.project(y - step * _full_grad(view, y, rec.ledger))
        if lam > 0:
            mom = mom_const
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            t = t_new
        y = x_new + mom * (x_new - x)
        x = x_new
        k += 1
        if rec.checkpoint(x):
            return x, "target_reached"
    return x, "iterations_done"


def agd(problem, config, x0=None, ledger=None, trace=None):
    """Projected accelerated gradient descent.

    Uses the constant momentum ``(sqrt(kappa)-1)/(sqrt(kappa)+1)`` with
    ``kappa = gamma/lam`` when strongly convex and the Nesterov/FISTA
    schedule otherwise.
    """
    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace)
    if view.gamma is None:
        raise ValueError("accelerated gradient descent needs a smoothness constant")
    step = config.step if config.step is not None else 1.0 / view.gamma
    x, status = _agd_loop(view, x, rec, step)
    return rec.finish(x, status)


# stochastic subgradient ---------------------------------------------------
def subgradient_sgd(problem, config, x0=None, ledger=None, trace=None):
    """Stochastic subgradient method with iterate averaging.

    Convex: steps ``B/(L sqrt(t))`` and the uniform average of all iterates.
    Strongly convex: steps ``2/(lam (t+1))`` and the average over the last
    half of the iterates. One uniformly sampled component per query.
    """
    view = as_view(problem)
    if view.L is None:
        raise ValueError("subgradient method needs a Lipschitz constant")
    lam = view.lam or 0.0
    if lam == 0 and view.B is None:
        raise ValueError("subgradient method needs a radius or strong convexity")
    rng = make_rng(config.seed)
    state = {"avg": None}

    def measure(x):
        # the first checkpoint precedes any averaging
        return view.measure(x if state["avg"] is None else state["avg"])

    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace, measure=measure)
    state["avg"] = x.copy()
    prefix = [np.zeros(view.dim)]
    scale = config.step if config.step is not None else 1.0
    t = 0
    status = "budget_exhausted"
    while rec.affordable(1):
        t += 1
        i = int(rng.integers(view.m))
        g = view.grad(x, i, ledger)
        prefix.append(prefix[-1] + x)
        if lam > 0:
            h = (t + 1) // 2
            state["avg"] = (prefix[t] - prefix[h - 1]) / (t - h + 1)
            eta = scale * 2.0 / (lam * (t + 1))
        else:
            state["avg"] = prefix[t] / t
            eta = scale * view.B / (view.L * math.sqrt(t))
        x = view.project(x - eta * g)
        if rec.checkpoint(state["avg"]):
            status = "target_reached"
            break
    return rec.finish(state["avg"], status)


# SVRG -----------------------------------------------------------------------
def _svrg_loop(view, x, rec, step, epoch_length, rng, max_epochs=None):
    m = view.m
    e = 0
    while max_epochs is None or e < max_epochs:
        if not rec.affordable(m + 1):
            return x, "budget_exhausted"
        anchor = x.copy()
        cached = [view.grad(anchor, i, rec.ledger) for i in range(m)]
        mu = np.mean(cached, axis=0)
        for _ in range(epoch_length):
            if not rec.affordable(1):
                return x, "budget_exhausted"
            i = int(rng.integers(m))
            g = view.grad(x, i, rec.ledger) - cached[i] + mu
            x = view.project(x - step * g)
            if rec.checkpoint(x):
                return x, "target_reached"
        e += 1
    return x, "iterations_done"


def svrg_certified_epoch_length(view):
    """Epoch length making the classical SVRG contraction at most 3/4.

    With step ``1/(10 gamma)`` the per-epoch factor is
    ``12.5 kappa/n + 1/4`` for epoch length ``n``.
    """
    kappa = view.gamma / view.lam
    return max(2 * view.m, math.ceil(25.0 * kappa))


def svrg(problem, config, x0=None, ledger=None, trace=None, measure=None):
    """SVRG with cached anchor gradients.

    Each epoch costs ``m`` queries for the anchor gradient plus one fresh
    query per inner step; the inner step count defaults to ``2m`` and the
    step to ``1/(10 gamma)``. The anchor of the next epoch is the last inner
    iterate.
    """
    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace, measure=measure)
    if view.gamma is None:
        raise ValueError("SVRG needs a smoothness constant")
    if not (view.lam or 0) > 0:
        raise ValueError("SVRG needs strong convexity; apply regularize_reduce first")
    step = config.step if config.step is not None else 1.0 / (10.0 * view.gamma)
    n = config.epoch_length if config.epoch_length else 2 * view.m
    x, status = _svrg_loop(view, x, rec, step, n, make_rng(config.seed))
    return rec.finish(x, status)


# solver handles ----------------------------------------------------------------
@dataclass
class SolverHandle:
    """A solver with an optional linear-rate certificate.

    ``sc_iterations(view)`` returns the iteration (or epoch) count that
    provably cuts the suboptimality of a strongly convex smooth problem by a
    factor of four; ``run_iterations`` runs exactly that many.
    """

    name: str
    seed: int = 0

    def sc_iterations(self, view):
        raise NotImplementedError

    def run_iterations(self, view, x0, iters, ledger, trace, budget=None, cadence=None,
                       target=None, measure=None):
        raise NotImplementedError


class AGDHandle(SolverHandle):
    def __init__(self):
        super().__init__("agd")

    def sc_iterations(self, view):
        # F(x_k)-F* <= 2 (1 - 1/sqrt(kappa))^k (F(x_0)-F*) for constant momentum
        return math.ceil(math.sqrt(view.gamma / view.lam) * math.log(8.0))

    def run_iterations(self, view, x0, iters, ledger, trace, budget=None, cadence=None,
                       target=None, measure=None):
        rec = Recorder(view, ledger, budget if budget is not None else 2**62, cadence,
                       target, measure=measure, trace=trace)
        x, _ = _agd_loop(view, view.project(np.array(x0, dtype=float)), rec,
                         1.0 / view.gamma, iters)
        rec.checkpoint(x, force=True)
        return x


class SVRGHandle(SolverHandle):
    def __init__(self, seed=0, step_scale=0.1, epoch_length=None, epochs=None):
        super().__init__("svrg", seed)
        self.step_scale = step_scale
        self.epoch_length = epoch_length
        self.epochs = epochs
        self._rng = make_rng(seed)

    def _epoch(self, view):
        if self.epoch_length is not None:
            return self.epoch_length
        return svrg_certified_epoch_length(view)

    def sc_iterations(self, view):
        if self.epochs is not None:
            return self.epochs
        n = self._epoch(view)
        rho = 12.5 * (view.gamma / view.lam) / n + 0.25
        if rho >= 1.0:
            raise ValueError(f"epoch length {n} too short for a certified contraction")
        return math.ceil(math.log(4.0) / -math.log(rho))

    def run_iterations(self, view, x0, iters, ledger, trace, budget=None, cadence=None,
                       target=None, measure=None):
        rec = Recorder(view, ledger, budget if budget is not None else 2**62, cadence,
                       target, measure=measure, trace=trace)
        x, _ = _svrg_loop(view, view.project(np.array(x0, dtype=float)), rec,
                          self.step_scale / view.gamma, self._epoch(view), self._rng, iters)
        rec.checkpoint(x, force=True)
        return x


# Catalyst -------------------------------------------------------------------
def catalyst_accelerate(inner, problem, config, x0=None, ledger=None, trace=None):
    """Catalyst acceleration around a linearly convergent inner solver.

    Stage ``k`` approximately minimizes ``F(x) + kappa/2 ||x - y_{k-1}||^2``
    with a fixed number of inner iterations warm-started at ``x_{k-1}``, then
    extrapolates ``y_k = x_k + beta_k (x_k - x_{k-1})``. With ``kappa = 0``
    the inner solver runs once on ``F`` itself.
    """
    from .trace import ProxCenterView

    if getattr(inner, "sc_iterations", None) is None:
        raise ValueError("inner solver lacks a rate certificate")
    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace)
    lam = view.lam or 0.0
    kappa = config.kappa if config.kappa is not None else max(0.0, view.gamma / view.m - lam)
    remaining = config.budget - rec.used
    if kappa == 0:
        iters = config.inner_epochs
        x = inner.run_iterations(view, x, iters, ledger, rec.trace, remaining,
                                 rec.cadence, config.target, measure=view.measure)
        return rec.finish(x, "budget_exhausted" if rec.used >= config.budget else "done")
    q = lam / (lam + kappa)
    alpha = math.sqrt(q) if q > 0 else 1.0
    y = x.copy()
    status = "budget_exhausted"
    while True:
        remaining = config.budget - rec.used
        if remaining < view.m + 1:
            break
        sub = ProxCenterView(view, kappa, y)
        iters = max(1, config.inner_epochs or inner.sc_iterations(sub))
        x_new = inner.run_iterations(sub, x, iters, ledger, rec.trace, remaining,
                                     rec.cadence, config.target, measure=view.measure)
        a2 = alpha * alpha
        # alpha_k^2 = (1 - alpha_k) alpha_{k-1}^2 + q alpha_k
        bq = a2 - q
        alpha_new = 0.5 * (-bq + math.sqrt(bq * bq + 4.0 * a2))
        beta_k = alpha * (1.0 - alpha) / (a2 + alpha_new)
        y = view.project(x_new + beta_k * (x_new - x))
        x, alpha = x_new, alpha_new
        if rec.trace.queries_to_target is not None:
            status = "target_reached"
            break
    return rec.finish(x, status)


# reductions and pipelines -------------------------------------------------------
def regularize_reduce(problem, eps, B=None):
    """Add ``lam/2 ||x||^2`` with ``lam = eps/B^2`` to every component.

    An ``eps/2``-minimizer of the regularized problem is ``eps``-suboptimal
    for the original one on the ball of radius ``B``.
    """
    B = B if B is not None else problem.fclass.radius_B
    if B is None:
        raise ValueError("regularization reduction needs a radius")
    lam = eps / (B * B)
    fc = problem.fclass
    new = FunctionClass(
        lipschitz_L=None if fc.lipschitz_L is None else fc.lipschitz_L + lam * B,
        smooth_gamma=None if fc.smooth_gamma is None else fc.smooth_gamma + lam,
        strong_lambda=fc.strong_lambda + lam,
        radius_B=fc.radius_B,
    )
    comps = [RegularizedComponent(c, lam) for c in problem.components]
    return Problem(comps, new, name=problem.name + "+reg",
                   meta=dict(problem.meta, reg_lambda=lam))


def smoothed_minimize(problem, eps, mode="deterministic_agd", config=None, x0=None,
                      ledger=None, trace=None):
    """Minimize a Lipschitz sum to accuracy ``eps`` through smoothing.

    Not strongly convex: smooth with ``beta = L^2/eps`` and run AGD for
    ``ceil(2 R L / eps)`` iterations (``R`` bounds the distance to a
    minimizer), or Catalyst-accelerated SVRG in ``randomized_accel`` mode.
    Strongly convex: stagewise smoothing with AGD or SVRG as inner solver.
    With a known optimum and ``config.target`` set, runs stop once the target
    is met.
    """
    config = config or SolverConfig()
    fc = problem.fclass
    if fc.lipschitz_L is None:
        raise ValueError("smoothed minimization needs a Lipschitz constant")
    if mode not in ("deterministic_agd", "randomized_accel"):
        raise ValueError(f"unknown mode {mode!r}")
    L = fc.lipschitz_L
    if fc.strong_lambda > 0:
        if ledger is None:
            ledger = QueryLedger(problem.m, keep_points=False)
        trace = trace if trace is not None else RunTrace()
        inner = AGDHandle() if mode == "deterministic_agd" else SVRGHandle(seed=config.seed)
        start = ledger.total
        x = adapt_smooth(problem, eps, inner, ledger, x0=x0, trace=trace,
                         budget=config.budget, cadence=config.cadence, target=config.target)
        trace.final = x
        trace.status = "done" if ledger.total - start < config.budget else "budget_exhausted"
        if config.target is not None and trace.queries_to_target is None:
            sub = problem.suboptimality(x)
            if sub is not None and sub <= config.target:
                trace.queries_to_target = ledger.total
        return trace
    if fc.radius_B is None:
        raise ValueError("smoothed minimization needs a radius or strong convexity")
    sp = smooth_sum(problem, L * L / eps)
    if mode == "deterministic_agd":
        r = fc.radius_B + (0.0 if x0 is None else float(np.linalg.norm(x0)))
        iters = math.ceil(2.0 * r * L / eps)
        cfg = replace(config, budget=min(config.budget, iters * problem.m))
        return agd(sp, cfg, x0=x0, ledger=ledger, trace=trace)
    inner = SVRGHandle(seed=config.seed, step_scale=config.inner_step_scale,
                       epoch_length=config.epoch_length or 2 * problem.m,
                       epochs=config.inner_epochs or 1)
    return catalyst_accelerate(inner, sp, config, x0=x0, ledger=ledger, trace=trace)


def cyclic_prox(problem, config, x0=None, ledger=None, trace=None):
    """Incremental proximal-point method cycling through the components.

    Pass ``s`` uses prox parameter ``beta_s = L sqrt(s) / B`` (step
    ``B/(L sqrt(s))``); the ball constraint is handled by the oracle's prox.
    """
    view, ledger, x, rec = _setup(problem, config, x0, ledger, trace)
    L = view.L or 1.0
    B = view.B or 1.0
    scale = config.step if config.step is not None else 1.0
    s = 0
    status = "budget_exhausted"
    while rec.affordable(1):
        s += 1
        beta = L * math.sqrt(s) / (B * scale)
        for i in range(view.m):
            if not rec.affordable(1):
                break
            x = view.prox(x, i, beta, ledger)
        if rec.checkpoint(x):
            status = "target_reached"
            break
    return rec.finish(x, status)


SOLVERS = {
    "gd": gd,
    "subgradient_descent": subgradient_descent,
    "agd": agd,
    "sgd": subgradient_sgd,
    "svrg": svrg,
    "cyclic_prox": cyclic_prox,
}

__all__ = ["SolverConfig", "SolverHandle", "AGDHandle", "SVRGHandle", "gd", "agd",
           "subgradient_sgd", "subgradient_descent", "svrg", "catalyst_accelerate", "regularize_reduce",
           "smoothed_minimize", "cyclic_prox", "svrg_certified_epoch_length", "SOLVERS"]
