"""Run traces and first-order views over problems."""
from dataclasses import dataclass, field
import math

import numpy as np

from .oracle import evaluate_sum, project_ball, query


@dataclass
class RunTrace:
    """Checkpoints ``(cumulative_queries, iterate, suboptimality)`` of a run."""

    queries: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    subopt: list = field(default_factory=list)
    final: np.ndarray | None = None
    queries_to_target: int | None = None
    status: str = "running"

    def add(self, q, x, sub=None):
        x = np.array(x, dtype=float)
        if self.queries and q <= self.queries[-1]:
            self.iterates[-1] = x
            self.subopt[-1] = sub
        else:
            self.queries.append(int(q))
            self.iterates.append(x)
            self.subopt.append(sub)

    def to_bytes(self):
        """Stable byte encoding used for determinism checks."""
        parts = [np.asarray(self.queries, dtype=np.int64).tobytes()]
        parts += [np.asarray(it, dtype=np.float64).tobytes() for it in self.iterates]
        parts.append(np.asarray([np.nan if s is None else s for s in self.subopt],
                                dtype=np.float64).tobytes())
        return b"".join(parts)


class ProblemView:
    """Gradient access to a :class:`~proxsum.oracle.Problem` through ``h_F``."""

    def __init__(self, problem):
        self.problem = problem
        fc = problem.fclass
        self.m = problem.m
        self.dim = problem.dim
        self.gamma = fc.smooth_gamma
        self.lam = fc.strong_lambda
        self.L = fc.lipschitz_L
        self.B = fc.radius_B

    def grad(self, x, i, ledger):
        return query(self.problem, x, i, 1.0, ledger, want_prox=False).gradient

    def prox(self, x, i, beta, ledger):
        return query(self.problem, x, i, beta, ledger).prox_point

    def project(self, x):
        return project_ball(x, self.B)

    def value(self, x):
        return evaluate_sum(self.problem, x)

    def measure(self, x):
        return self.problem.suboptimality(x)


class ProxCenterView:
    """Components ``f_i(x) + kappa/2 ||x - center||^2`` of a wrapped view."""

    def __init__(self, base, kappa, center):
        self.base = base
        self.kappa = float(kappa)
        self.center = np.asarray(center, dtype=float)
        self.m = base.m
        self.dim = base.dim
        self.gamma = base.gamma + self.kappa
        self.lam = base.lam + self.kappa
        self.L = None
        self.B = base.B

    def grad(self, x, i, ledger):
        return self.base.grad(x, i, ledger) + self.kappa * (x - self.center)

    def project(self, x):
        return self.base.project(x)

    def value(self, x):
        d = x - self.center
        return self.base.value(x) + 0.5 * self.kappa * float(d @ d)

    def measure(self, x):
        return None


def as_view(p):
    if hasattr(p, "grad") and hasattr(p, "measure"):
        return p
    return ProblemView(p)


class Recorder:
    """Budget enforcement, measurement cadence and early stopping for a run."""

    def __init__(self, view, ledger, budget, cadence=None, target=None, measure=None,
                 trace=None, measure_view=None):
        self.view = view
        self.ledger = ledger
        self.budget = int(budget)
        self.start = ledger.total
        self.cadence = cadence if cadence else max(1, math.ceil(budget / 200))
        self.target = target
        mv = measure_view if measure_view is not None else view
        self.measure = measure if measure is not None else mv.measure
        self.trace = trace if trace is not None else RunTrace()
        self._next = self.start

    @property
    def used(self):
        return self.ledger.total - self.start

    def affordable(self, cost):
        return self.used + cost <= self.budget

    def checkpoint(self, x, force=False):
        """Record ``x`` when the cadence is due; returns True to stop early."""
        q = self.ledger.total
        if not force and q < self._next:
            return False
        while self._next <= q:
            self._next += self.cadence
        sub = self.measure(x)
        self.trace.add(q, x, sub)
        if self.target is not None and sub is not None and sub <= self.target:
            if self.trace.queries_to_target is None:
                self.trace.queries_to_target = q
            return True
        return False

    def finish(self, x, status):
        self.checkpoint(x, force=True)
        self.trace.final = np.array(x, dtype=float)
        self.trace.status = status
        if (self.trace.queries_to_target is None and self.target is not None
                and self.trace.subopt and self.trace.subopt[-1] is not None
                and self.trace.subopt[-1] <= self.target):
            self.trace.queries_to_target = self.trace.queries[-1]
        return self.trace
