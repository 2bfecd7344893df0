"""Resisting oracles for deterministic algorithms.

The adversary answers queries from truncated chain functions that depend
only on directions ``v_0 .. v_{t-1}`` revealed in earlier rounds. A round
ends once ``ceil(m/2)`` distinct components have been queried; the
components not touched in that round get indicator ``delta = 1`` and a new
direction orthogonal to every query so far is drawn. After the last round,
or on demand, the game is frozen into a static :class:`Problem` with its
closed-form optimum attached.

Variants (all scaled to the requested constants):

``lipschitz``
    ``f_i = L/sqrt(2) |bB - <x,v_0>| + L/(2 sqrt(k)) sum_r delta_ir |<x, v_{r-1} - v_r>|``
    with ``k = floor(LB/(12 eps))`` and ``b = 1/sqrt(k+1)``, on the ``B``-ball.
``lipschitz_sc``
    The ``lipschitz`` chain on the ball of radius ``sqrt(eps/lam)`` plus
    ``lam/2 ||x||^2``.
``smooth``
    ``gamma/8 (delta_i1 (z_0^2 - 2aB z_0) + sum_r delta_ir (z_{r-1}-z_r)^2 + delta_ik z_k^2)``
    with ``k = floor(sqrt(gamma B^2/(32 eps)))`` and ``a = sqrt(3/(k+1))``.
``smooth_sc``
    ``(gamma-lam)/8 (delta_i1 (z_0^2 - 2C z_0) + delta_ik zeta z_k^2 + sum_r ...) + lam/2 ||x||^2``
    with ``Q``, ``q``, ``zeta = 1 - q`` and ``C`` calibrated so ``F(0) - F* = eps0``.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import kernels
from .oracle import (ComponentOracle, ball_prox, FunctionClass, OracleResponse, Problem,
                     TOL_SUBGRAD, evaluate_sum)
from .termsum import ABS, SQ, SubspaceComponent, TermSum

VARIANTS = ("lipschitz", "lipschitz_sc", "smooth", "smooth_sc")


class DimensionExhausted(RuntimeError):
    """No direction orthogonal to the query history is left."""


def _chain_prox(anchor_w, anchor, w):
    def prox(z, beta):
        return kernels.chain_tv_prox(z, anchor_w, anchor, w, beta)
    return prox


def _quad_chain_prox(p, lin, w):
    """Prox of ``sum_j p_j/2 z_j^2 + <lin, z> + sum_r w_r/2 (z_{r-1} - z_r)^2``."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    lin = np.asarray(lin, dtype=float)

    def prox(z, beta):
        n = z.shape[0]
        diag = p + beta
        if n > 1:
            diag = diag.copy()
            diag[:-1] += w
            diag[1:] += w
        off = -w
        return kernels.tridiag_solve(off, diag, off, beta * z - lin)
    return prox


class DetAdversary:
    """Live resisting oracle.

    Parameters
    ----------
    variant : {"lipschitz", "lipschitz_sc", "smooth", "smooth_sc"}
    m : int
        Number of components, at least 2.
    eps : float
        Target accuracy the construction is tuned against.
    L, B, gamma, lam : float
        Class constants (only those relevant to the variant are used).
    eps0 : float, optional
        Initial suboptimality for ``smooth_sc`` (default ``4 gamma eps/lam``).
    dim : int, optional
        Ambient dimension; defaults to the dimension used by the hardness
        argument.
    seed : int
        Seed for drawing new directions.

    Attributes
    ----------
    round : int
        Current 1-based round; ``k + 1`` once every round has closed.
    delta : ndarray, shape (m, k+1)
        ``delta[i, r]`` for closed rounds ``r`` (column 0 unused).
    """

    def __init__(self, variant, m, eps, L=1.0, B=1.0, gamma=1.0, lam=0.0, eps0=None,
                 dim=None, seed=0):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if m < 2:
            raise ValueError("the resisting oracle needs m >= 2")
        for name, v in (("eps", eps), ("L", L), ("B", B), ("gamma", gamma)):
            if not v > 0:
                raise ValueError(f"{name} must be positive")
        if variant.endswith("_sc") and not lam > 0:
            raise ValueError("strongly convex variants need lam > 0")
        self.variant = variant
        self.m = m
        self.eps = float(eps)
        self.L, self.B, self.gamma, self.lam = float(L), float(B), float(gamma), float(lam)
        self.half = m // 2
        self.need = (m + 1) // 2
        self._setup_params(eps0)
        if dim is None:
            dim = self.theory_dim
        self.dim = int(dim)
        if self.dim < self.k + 1:
            raise ValueError("dimension must exceed k")
        self.rng = np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))
        # orthonormal basis of span(queries, directions)
        self._span = np.zeros((min(self.dim, 64), self.dim))
        self._span_n = 0
        self.basis = np.zeros((self.k + 1, self.dim))
        self.delta = np.zeros((m, self.k + 1), dtype=np.int8)
        self.round = 1
        self.round_components = set()
        self.query_rounds = []
        self.finalized = None
        self._draw_direction(0)

    # parameters ------------------------------------------------------------
    def _setup_params(self, eps0):
        v, m = self.variant, self.m
        if v in ("lipschitz", "lipschitz_sc"):
            if v == "lipschitz_sc":
                self.B = math.sqrt(self.eps / self.lam)
            LB = self.L * self.B
            k = math.floor(LB / (12.0 * self.eps))
            if self.eps >= LB / 12.0 or k < 1:
                warnings.warn("eps >= LB/12: the chain degenerates; using k = 1")
                k = max(k, 1)
            self.k = k
            self.b = 1.0 / math.sqrt(k + 1)
            self.radius = self.B
            self.theory_dim = math.ceil(m * LB / self.eps) + k + 1
            self.eps0 = None
        elif v == "smooth":
            s = self.gamma * self.B ** 2
            k = math.floor(1.0 / math.sqrt(32.0 * self.eps / s))
            if self.eps >= s / 128.0 or k < 2:
                warnings.warn("eps >= gamma B^2/128: floor argument needs k >= 2")
                k = max(k, 1)
            self.k = k
            self.a = math.sqrt(3.0 / (k + 1))
            self.radius = self.B
            self.theory_dim = math.ceil(m / math.sqrt(self.eps / s)) + k + 1
            self.eps0 = None
        else:
            g, lam = self.gamma, self.lam
            lh = lam / g
            if not lh < 1:
                raise ValueError("smooth_sc needs lam < gamma")
            if eps0 is None:
                eps0 = 4.0 * g * self.eps / lam
            self.eps0 = float(eps0)
            if g / lam <= 73:
                warnings.warn("gamma/lam <= 73 is outside the hardness regime")
            if self.eps0 <= 3.0 * g * self.eps / lam:
                warnings.warn("eps0 <= 3 gamma eps/lam is outside the hardness regime")
            Q = self.half / m * (1.0 / lh - 1.0) + 1.0
            sq = math.sqrt(Q)
            q = (sq - 1.0) / (sq + 1.0)
            self.Q, self.q, self.zeta = Q, q, 1.0 - q
            self.C = math.sqrt(8.0 * (self.eps0 / g) / (lh * (sq - 1.0) ** 2))
            arg = self.eps0 / (2.0 * sq * self.eps)
            t = math.floor((sq - 1.0) / 4.0 * math.log(arg)) if arg > 1 else 0
            self.t_target = t
            k = math.ceil(t - 1.0 / (2.0 * math.log(q))) - 1
            if t < 1:
                warnings.warn("eps is too close to eps0 for a nontrivial round count")
            self.k = max(k, 1)
            self.radius = None
            self.theory_dim = 2 * m * (self.k + 1) + self.k + 1

    # geometry ------------------------------------------------------------------
    def _add_span(self, v):
        r, nrm = kernels.mgs_orthogonalize(self._span, self._span_n, v)
        scale = float(np.linalg.norm(v))
        if nrm <= 1e-13 * max(scale, 1e-300) or nrm == 0.0:
            return
        if self._span_n == self._span.shape[0]:
            grow = np.zeros((min(self.dim, 2 * self._span.shape[0]), self.dim))
            grow[: self._span_n] = self._span[: self._span_n]
            self._span = grow
        if self._span_n >= self.dim:
            return
        self._span[self._span_n] = r / nrm
        self._span_n += 1

    def _draw_direction(self, r):
        g = self.rng.standard_normal(self.dim)
        res, nrm = kernels.mgs_orthogonalize(self._span, self._span_n, g)
        if nrm < 1e-8 * math.sqrt(self.dim) or self._span_n >= self.dim:
            raise DimensionExhausted(
                f"dimension {self.dim} exhausted while drawing direction {r}")
        v = res / nrm
        # one more pass against the directions themselves keeps them orthonormal
        v, nrm = kernels.mgs_orthogonalize(self.basis, r, v)
        v /= nrm
        self.basis[r] = v
        self._add_span(v)

    # component construction -------------------------------------------------------
    def _component(self, i, n, final, delta=None):
        """Truncated (or final) component ``i`` on the first ``n`` directions."""
        delta = self.delta if delta is None else delta
        k = self.k
        var = self.variant
        ts = TermSum(n)
        if var in ("lipschitz", "lipschitz_sc"):
            wa = self.L / math.sqrt(2.0)
            anchor = self.b * self.B
            wc = self.L / (2.0 * math.sqrt(k))
            ts.add(ABS, wa, {0: 1.0}, anchor)
            w = np.zeros(max(n - 1, 0))
            for r in range(1, n):
                w[r - 1] = wc * delta[i, r]
                ts.add(ABS, w[r - 1], {r - 1: 1.0, r: -1.0})
            fast = _chain_prox(wa, anchor, w)
            mu = self.lam if var == "lipschitz_sc" else 0.0
        else:
            if var == "smooth":
                s, lin_a, last = self.gamma / 8.0, self.a * self.B, 1.0
                mu = 0.0
            else:
                s, lin_a, last = (self.gamma - self.lam) / 8.0, self.C, self.zeta
                mu = self.lam
            d1 = delta[i, 1] if (final or self.round > 1) and k >= 1 else 0
            p = np.zeros(n)
            lin = np.zeros(n)
            w = np.zeros(max(n - 1, 0))
            if d1:
                ts.add(SQ, s, {0: 1.0})
                ts.add_linear(np.eye(n)[0] * (-2.0 * s * lin_a))
                p[0] = 2.0 * s
                lin[0] = -2.0 * s * lin_a
            for r in range(1, n):
                if delta[i, r]:
                    ts.add(SQ, s, {r - 1: 1.0, r: -1.0})
                    w[r - 1] = 2.0 * s
            if final and delta[i, k]:
                ts.add(SQ, s * last, {k: 1.0})
                p[k] += 2.0 * s * last
            fast = _quad_chain_prox(p, lin, w)
        return SubspaceComponent(self.basis[:n], ts, mu=mu, radius=self.radius,
                                 fast_prox=fast, dim=self.dim)

    def _live_component(self, i):
        if self.round > self.k:
            return self._component(i, self.k + 1, final=True)
        return self._component(i, self.round, final=False)

    # game --------------------------------------------------------------------------
    def answer(self, i, x, beta, want_prox=True):
        """Answer ``h(x, i, beta)`` from the current truncation and update the rounds."""
        if not 0 <= i < self.m:
            raise ValueError("component index out of range")
        if not beta > 0:
            raise ValueError("beta must be positive")
        x = np.asarray(x, dtype=float)
        comp = self._live_component(i)
        resp = OracleResponse(comp.value(x), comp.subgradient(x),
                              comp.prox(x, beta) if want_prox else None)
        self.query_rounds.append(self.round)
        self._add_span(x)
        if self.round <= self.k:
            self.round_components.add(i)
            if len(self.round_components) >= self.need:
                self._close_round()
        return resp

    def _close_round(self):
        t = self.round
        for j in range(self.m):
            self.delta[j, t] = 0 if j in self.round_components else 1
        self._draw_direction(t)
        self.round_components = set()
        self.round = t + 1

    def peek_value(self, i, x):
        """Value of the current truncation without recording a query."""
        return self._live_component(i).value(np.asarray(x, dtype=float))

    def problem(self):
        """Live problem whose components route queries to this adversary."""
        comps = [_LiveComponent(self, i) for i in range(self.m)]
        return Problem(comps, self.function_class(), name=f"det-{self.variant}")

    def function_class(self):
        v = self.variant
        if v == "lipschitz":
            return FunctionClass(lipschitz_L=self.L, radius_B=self.B)
        if v == "lipschitz_sc":
            return FunctionClass(lipschitz_L=self.L + self.lam * self.B,
                                 strong_lambda=self.lam, radius_B=self.B)
        if v == "smooth":
            return FunctionClass(smooth_gamma=self.gamma, radius_B=self.B)
        return FunctionClass(smooth_gamma=self.gamma, strong_lambda=self.lam)

    # floors ---------------------------------------------------------------------------
    def floor_for_round(self, t):
        """Certified lower bound on ``F(x) - F*`` for points queried in round ``t``."""
        k, v = self.k, self.variant
        if v in ("lipschitz", "lipschitz_sc"):
            if t > k:
                return 0.0
            base = self.L * self.B * self.b / (6.0 * math.sqrt(k))
            if v == "lipschitz":
                return base
            return max(0.0, base - self._f_star_value())
        if v == "smooth":
            return self.gamma * self.B ** 2 / (32.0 * k * k) if t <= k // 2 else 0.0
        if t > k:
            return 0.0
        return self.eps0 * (self.q ** (2 * t) - self.q ** (2 * k + 2)) / math.sqrt(self.Q)

    def theoretical_floor(self):
        return self.floor_for_round(self.round)

    # finalization -------------------------------------------------------------------
    def _f_star_value(self):
        if not hasattr(self, "_fstar_cache"):
            v = self.variant
            if v == "lipschitz":
                val = 0.0
            elif v == "lipschitz_sc":
                # aggregated chain + lam/2 ||z||^2 on the ball: its constrained prox at 0
                k = self.k
                wa = self.L / math.sqrt(2.0)
                wc = self.half / self.m * self.L / (2.0 * math.sqrt(k))
                w = np.full(k, wc)
                z = ball_prox(lambda y, b: kernels.chain_tv_prox(y, wa, self.b * self.B, w, b),
                              np.zeros(k + 1), self.lam, self.B)
                ts = TermSum(k + 1).add(ABS, wa, {0: 1.0}, self.b * self.B)
                for r in range(1, k + 1):
                    ts.add(ABS, wc, {r - 1: 1.0, r: -1.0})
                self._xstar_coords = z
                val = ts.value(z) + 0.5 * self.lam * float(z @ z)
            elif v == "smooth":
                a = self.a * self.B
                val = -self.gamma * a * a * self.half / (8.0 * self.m) * (1.0 - 1.0 / (self.k + 2))
            else:
                val = -self.eps0
            self._fstar_cache = val
        return self._fstar_cache

    def _x_star_coords(self):
        k, v = self.k, self.variant
        r = np.arange(k + 1)
        if v == "lipschitz":
            return np.full(k + 1, self.b * self.B)
        if v == "lipschitz_sc":
            self._f_star_value()
            return self._xstar_coords
        if v == "smooth":
            return self.a * self.B * (1.0 - (r + 1.0) / (k + 2.0))
        return self.C * self.q ** (r + 1.0)

    def finalize(self):
        """Freeze the game into a static problem with its exact optimum.

        Unclosed rounds are completed as follows: in the open round the
        components already queried get ``delta = 0`` and the first
        ``floor(m/2)`` unqueried ones get ``delta = 1``; later rounds use
        ``delta = 1`` for components ``0 .. floor(m/2)-1``. Every closed round
        thus keeps exactly ``floor(m/2)`` ones, which the closed-form optimum
        relies on. Missing directions are drawn orthogonal to all queries.
        """
        if self.finalized is not None:
            return self.finalized
        delta = self.delta.copy()
        for t in range(self.round, self.k + 1):
            if t == self.round:
                free = [j for j in range(self.m) if j not in self.round_components]
                ones = free[: self.half]
            else:
                ones = list(range(self.half))
            delta[:, t] = 0
            delta[ones, t] = 1
            self._draw_direction(t)
        self.delta = delta
        self.round = self.k + 1
        self.round_components = set()
        comps = [self._component(i, self.k + 1, final=True) for i in range(self.m)]
        x_star = self.basis.T @ self._x_star_coords()
        f_star = self._f_star_value()
        prob = Problem(comps, self.function_class(), optimum=(x_star, f_star),
                       name=f"det-{self.variant}-final",
                       meta={"k": self.k, "variant": self.variant})
        prob.eps0 = evaluate_sum(prob, np.zeros(self.dim)) - f_star
        self.finalized = prob
        return prob


class _LiveComponent(ComponentOracle):
    def __init__(self, adversary, i):
        self.adv = adversary
        self.i = i
        self.dim = adversary.dim
        self.radius = adversary.radius

    def respond(self, x, beta, want_prox=True):
        return self.adv.answer(self.i, x, beta, want_prox)

    def value(self, x):
        return self.adv.peek_value(self.i, x)

    def subgradient(self, x):
        return self.adv._live_component(self.i).subgradient(np.asarray(x, dtype=float))

    def _prox(self, x, beta):
        return self.adv._live_component(self.i)._prox(x, beta)


def new_adversary(variant, m, eps, **params):
    """Construct a :class:`DetAdversary` (see its parameters)."""
    return DetAdversary(variant, m, eps, **params)


@dataclass
class ReplayReport:
    checked: int = 0
    violations: list = field(default_factory=list)
    max_value_gap: float = 0.0
    max_subgrad_slack: float = 0.0
    max_prox_gap: float = 0.0

    @property
    def ok(self):
        return not self.violations


def replay_verify(finalized, ledger, probes=1000, seed=0, prox_tol=1e-6):
    """Check every logged answer against the finalized components.

    For each record: the value must match, the returned subgradient must
    satisfy the subgradient inequality at ``probes`` random points (slack
    1e-9) and the returned prox must match within ``prox_tol``. The ledger
    must have been created with ``keep_responses=True``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    rep = ReplayReport()
    for rec in ledger.records:
        if len(rec) < 5:
            raise ValueError("ledger has no stored responses")
        qi, i, beta, x, resp = rec
        comp = finalized.components[i]
        rep.checked += 1
        val = comp.value(x)
        gap = abs(val - resp.value)
        rep.max_value_gap = max(rep.max_value_gap, gap)
        if gap > 1e-9 * max(1.0, abs(val)):
            rep.violations.append((qi, "value", gap))
        Y = _probe_points(comp, x, probes, rng)
        fy = _values(comp, Y)
        lhs = fy - (val + (Y - x) @ resp.gradient)
        worst = float(-lhs.min())
        rep.max_subgrad_slack = max(rep.max_subgrad_slack, worst)
        if worst > TOL_SUBGRAD:
            rep.violations.append((qi, "subgradient", worst))
        if resp.prox_point is not None:
            u = comp.prox(x, beta)
            pg = float(np.linalg.norm(u - resp.prox_point))
            rep.max_prox_gap = max(rep.max_prox_gap, pg)
            if pg > prox_tol:
                rep.violations.append((qi, "prox", pg))
    return rep


def _probe_points(comp, x, n, rng):
    V = comp.V
    scales = np.exp(rng.uniform(np.log(1e-6), np.log(2.0), size=(n, 1)))
    coef = rng.standard_normal((n, V.shape[0]))
    local = coef @ V
    noise = rng.standard_normal((n, x.shape[0])) * 0.1
    dirs = local + noise
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return x + scales * dirs


def _values(comp, Y):
    Z = Y @ comp.V.T
    vals = np.array([comp.ts.value(z) for z in Z])
    return vals + 0.5 * comp.mu * np.einsum("ij,ij->i", Y, Y)


def floor_violations(adversary, finalized, points, rounds, tol=1e-9):
    """Points whose final suboptimality falls below the floor of their round.

    Returns a list of ``(index, suboptimality, floor)``.
    """
    out = []
    f_star = finalized.optimum[1]
    for idx, (x, t) in enumerate(zip(points, rounds)):
        fl = adversary.floor_for_round(t)
        if fl <= 0:
            continue
        sub = evaluate_sum(finalized, x) - f_star
        if sub < fl - tol:
            out.append((idx, sub, fl))
    return out
