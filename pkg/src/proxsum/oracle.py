"""Component oracles, finite-sum problems and query accounting.

A component oracle answers the triple ``(f_i(x), g, prox_{f_i}(x, beta))``
where ``g`` is a subgradient and the prox is

    argmin_{u in X} f_i(u) + beta/2 * ||x - u||^2

over the domain ``X`` (all of R^d or a Euclidean ball of radius ``B``).
Component indices are 0-based throughout.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq, lsq_linear

TOL_ORTHO = 1e-10
TOL_PROX = 1e-9
TOL_SUBGRAD = 1e-9


class OracleError(ValueError):
    """Invalid oracle request (bad index, nonpositive beta, wrong shape)."""


@dataclass(frozen=True)
class FunctionClass:
    """Regularity metadata shared by all components of a problem.

    Parameters
    ----------
    lipschitz_L : float or None
    smooth_gamma : float or None
    strong_lambda : float
        0 means not strongly convex.
    radius_B : float or None
        Radius of the ball domain. ``None`` means unconstrained.
    """

    lipschitz_L: float | None = None
    smooth_gamma: float | None = None
    strong_lambda: float = 0.0
    radius_B: float | None = None

    def __post_init__(self):
        if self.lipschitz_L is None and self.smooth_gamma is None:
            raise ValueError("function class needs lipschitz_L or smooth_gamma")
        for name in ("lipschitz_L", "smooth_gamma"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.strong_lambda >= 0:
            raise ValueError("strong_lambda must be nonnegative")
        if self.radius_B is not None and not self.radius_B > 0:
            raise ValueError("radius_B must be positive")
        if (self.strong_lambda > 0 and self.smooth_gamma is not None
                and self.smooth_gamma < self.strong_lambda):
            raise ValueError("smooth_gamma must be at least strong_lambda")

    def replace(self, **kw):
        d = dict(lipschitz_L=self.lipschitz_L, smooth_gamma=self.smooth_gamma,
                 strong_lambda=self.strong_lambda, radius_B=self.radius_B)
        d.update(kw)
        return FunctionClass(**d)


@dataclass(frozen=True)
class OracleResponse:
    value: float
    gradient: np.ndarray
    prox_point: np.ndarray | None


def project_ball(x, B=None):
    """Euclidean projection onto ``{||x|| <= B}``; identity when ``B`` is None."""
    x = np.asarray(x, dtype=float)
    if B is None:
        return x
    nrm = float(np.linalg.norm(x))
    if nrm <= B:
        return x
    y = x * (B / nrm)
    # rounding can leave ||y|| a hair above B; shrink so projecting again is a no-op
    while np.linalg.norm(y) > B:
        y = y * (1.0 - 2.0 ** -52)
    return y


def ball_prox(unconstrained_prox, x, beta, B):
    """Prox over a ball given the unconstrained prox of the same function.

    Uses the identity ``prox_{f + nu/2||.||^2}(x, beta) =
    prox_f(beta x/(beta+nu), beta+nu)`` and finds the multiplier ``nu >= 0``
    with ``||u(nu)|| = B`` by root finding. ``||u(nu)||`` is nonincreasing.
    """
    u = unconstrained_prox(x, beta)
    if B is None or np.linalg.norm(u) <= B:
        return u

    def gap(nu):
        return np.linalg.norm(unconstrained_prox(beta * x / (beta + nu), beta + nu)) - B

    hi = beta
    while gap(hi) > 0:
        hi *= 4.0
        if hi > 1e300:
            break
    nu = brentq(gap, 0.0, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-15, maxiter=500)
    u = unconstrained_prox(beta * x / (beta + nu), beta + nu)
    return project_ball(u, B)


class ComponentOracle:
    """Base class for one convex component ``f_i``.

    Subclasses implement ``value``, ``subgradient`` and ``_prox`` (the prox
    over all of R^d). ``radius`` restricts the domain to a ball, in which
    case ``prox`` returns the constrained prox. ``subdifferential`` returns
    ``(g0, G)`` describing ``{g0 + G s : s in [-1, 1]^p}``; the default is
    the singleton ``{subgradient(x)}``.
    """

    dim: int = 0
    radius: float | None = None

    def value(self, x):
        raise NotImplementedError

    def subgradient(self, x):
        raise NotImplementedError

    def _prox(self, x, beta):
        raise NotImplementedError

    def prox(self, x, beta):
        if not beta > 0:
            raise OracleError("beta must be positive")
        x = np.asarray(x, dtype=float)
        return ball_prox(self._prox, x, beta, self.radius)

    def subdifferential(self, x):
        g = self.subgradient(x)
        return g, np.zeros((g.shape[0], 0))

    def respond(self, x, beta, want_prox=True):
        """The triple ``h(x, beta)``; ``want_prox=False`` skips the prox work."""
        x = np.asarray(x, dtype=float)
        u = self.prox(x, beta) if want_prox else None
        return OracleResponse(float(self.value(x)), self.subgradient(x), u)

    def minimizer(self):
        """Optional exact minimizer hook; ``None`` when not available."""
        return None


def _kink_tol(*scales):
    return 1e-10 * max(1.0, *[abs(s) for s in scales])


class ZeroComponent(ComponentOracle):
    def __init__(self, dim, radius=None):
        self.dim = dim
        self.radius = radius

    def value(self, x):
        return 0.0

    def subgradient(self, x):
        return np.zeros(self.dim)

    def _prox(self, x, beta):
        return np.array(x, dtype=float)


class SquaredNormComponent(ComponentOracle):
    """``f(x) = scale/2 * ||x||^2``."""

    def __init__(self, dim, scale=1.0, radius=None):
        self.dim = dim
        self.scale = float(scale)
        self.radius = radius

    def value(self, x):
        return 0.5 * self.scale * float(x @ x)

    def subgradient(self, x):
        return self.scale * np.asarray(x, dtype=float)

    def _prox(self, x, beta):
        return beta * x / (beta + self.scale)

    def minimizer(self):
        return np.zeros(self.dim)


class LinearComponent(ComponentOracle):
    """``f(x) = <g, x> + const``."""

    def __init__(self, g, const=0.0, radius=None):
        self.g = np.asarray(g, dtype=float)
        self.dim = self.g.shape[0]
        self.const = float(const)
        self.radius = radius

    def value(self, x):
        return float(self.g @ x) + self.const

    def subgradient(self, x):
        return self.g.copy()

    def _prox(self, x, beta):
        return x - self.g / beta


class AbsComponent(ComponentOracle):
    """``f(x) = weight * |<a, x> - offset|``. Subgradient uses sign(0) = 0."""

    def __init__(self, a, offset=0.0, weight=1.0, radius=None):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.dim = self.a.shape[0]
        self.offset = float(offset)
        self.weight = float(weight)
        self.radius = radius
        self._aa = float(self.a @ self.a)

    def _s(self, x):
        return float(self.a @ x) - self.offset

    def value(self, x):
        return self.weight * abs(self._s(x))

    def subgradient(self, x):
        return self.weight * np.sign(self._s(x)) * self.a

    def subdifferential(self, x):
        s = self._s(x)
        if abs(s) <= _kink_tol(self.offset, np.linalg.norm(x) * math.sqrt(self._aa)):
            return np.zeros(self.dim), (self.weight * self.a)[:, None]
        return self.subgradient(x), np.zeros((self.dim, 0))

    def _prox(self, x, beta):
        if self._aa == 0.0:
            return np.array(x, dtype=float)
        s = self._s(x)
        shift = self.weight * self._aa / beta
        if s > shift:
            return x - (self.weight / beta) * self.a
        if s < -shift:
            return x + (self.weight / beta) * self.a
        return x - (s / self._aa) * self.a


class HingeComponent(ComponentOracle):
    """``f(x) = weight * max(0, 1 - label * <a, x>)``."""

    def __init__(self, a, label=1.0, weight=1.0, radius=None):
        self.a = np.asarray(a, dtype=float)
        self.dim = self.a.shape[0]
        self.label = float(label)
        self.weight = float(weight)
        self.radius = radius
        self._aa = float(self.a @ self.a)

    def _s(self, x):
        return 1.0 - self.label * float(self.a @ x)

    def value(self, x):
        return self.weight * max(0.0, self._s(x))

    def subgradient(self, x):
        if self._s(x) > 0:
            return -self.weight * self.label * self.a
        return np.zeros(self.dim)

    def subdifferential(self, x):
        if abs(self._s(x)) <= _kink_tol(1.0, np.linalg.norm(x) * math.sqrt(self._aa)):
            half = -0.5 * self.weight * self.label * self.a
            return half, half[:, None]
        return self.subgradient(x), np.zeros((self.dim, 0))

    def _prox(self, x, beta):
        s = self._s(x)
        if s <= 0 or self._aa == 0.0:
            return np.array(x, dtype=float)
        step = self.weight * self._aa / beta
        if s >= step:
            return x + (self.weight / beta) * self.label * self.a
        return x + (s / self._aa) * self.label * self.a


class LeastSquaresComponent(ComponentOracle):
    """``f(x) = 1/2 * ||A x - b||^2`` for a small block of rows."""

    def __init__(self, A, b, radius=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.dim = self.A.shape[1]
        self.radius = radius
        self._H = self.A.T @ self.A
        self._Atb = self.A.T @ self.b

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def subgradient(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def _prox(self, x, beta):
        if self.A.shape[0] == 1:
            a = self.A[0]
            rhs = self._Atb + beta * x
            return (rhs - a * (a @ rhs) / (beta + a @ a)) / beta
        return np.linalg.solve(self._H + beta * np.eye(self.dim), self._Atb + beta * x)


class RegularizedComponent(ComponentOracle):
    """``f(x) + lam/2 * ||x||^2`` for a wrapped component ``f``."""

    def __init__(self, base, lam, radius=None):
        self.base = base
        self.lam = float(lam)
        self.dim = base.dim
        self.radius = base.radius if radius is None else radius

    def value(self, x):
        return self.base.value(x) + 0.5 * self.lam * float(x @ x)

    def subgradient(self, x):
        return self.base.subgradient(x) + self.lam * np.asarray(x, dtype=float)

    def subdifferential(self, x):
        g0, G = self.base.subdifferential(x)
        return g0 + self.lam * np.asarray(x, dtype=float), G

    def _prox(self, x, beta):
        return self.base._prox(beta * x / (beta + self.lam), beta + self.lam)


@dataclass
class Problem:
    """Finite sum ``F(x) = (1/m) sum_i f_i(x)`` with class metadata.

    Parameters
    ----------
    components : list of ComponentOracle
    fclass : FunctionClass
    optimum : tuple (x_star, F_star) or None
    eps0 : float or None
        ``F(0) - F*``.
    name : str
    reference : bool
        True when ``optimum`` comes from a numerical reference solve rather
        than a closed form.
    """

    components: list
    fclass: FunctionClass
    optimum: tuple | None = None
    eps0: float | None = None
    name: str = ""
    reference: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("problem needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")

    @property
    def m(self):
        return len(self.components)

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def f_star(self):
        return None if self.optimum is None else self.optimum[1]

    def suboptimality(self, x):
        if self.optimum is None:
            return None
        return evaluate_sum(self, x) - self.optimum[1]


class QueryLedger:
    """Append-only record of oracle queries with per-component counters.

    Parameters
    ----------
    m : int
        Number of components.
    keep_points : bool
        Store a copy of each query point.
    keep_responses : bool
        Also store the returned ``OracleResponse`` (needed for replay).
    """

    def __init__(self, m, keep_points=True, keep_responses=False):
        self.m = m
        self.keep_points = keep_points
        self.keep_responses = keep_responses
        self.records = []
        self.counts = np.zeros(m, dtype=np.int64)
        self.total = 0

    def record(self, component, beta, point, response=None):
        pt = np.array(point, dtype=float) if self.keep_points else None
        rec = (self.total, int(component), float(beta), pt)
        if self.keep_responses:
            rec = rec + (response,)
        self.records.append(rec)
        self.counts[component] += 1
        self.total += 1

    def __len__(self):
        return self.total


def evaluate_sum(problem, x):
    """``(1/m) sum_i f_i(x)`` evaluated out of band (no ledger entry)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise OracleError(f"expected shape ({problem.dim},), got {x.shape}")
    return float(sum(c.value(x) for c in problem.components) / problem.m)


def query(problem, x, i, beta, ledger, want_prox=True):
    """One call of the oracle ``h_F(x, i, beta)``; appends one ledger record.

    ``want_prox=False`` lets gradient-only callers skip computing the prox
    part of the answer; the call is still counted as one query.
    """
    if not 0 <= i < problem.m:
        raise OracleError(f"component index {i} out of range [0, {problem.m})")
    if not beta > 0:
        raise OracleError("beta must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dim,):
        raise OracleError(f"expected shape ({problem.dim},), got {x.shape}")
    resp = problem.components[i].respond(x, beta, want_prox)
    ledger.record(i, beta, x, resp)
    return resp


def check_prox_optimality(component, x, beta, u):
    """Norm of the min-norm element of ``df(u) + beta(u - x) + N_X(u)``.

    The subdifferential is the box-parametrized set reported by
    ``component.subdifferential``; the normal cone of the ball is
    ``{t u : t >= 0}`` when ``u`` is on the boundary. An infeasible ``u`` adds
    its scaled distance to the ball. Since the prox objective is
    ``beta``-strongly convex, ``||u - prox|| <= residual / beta``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g0, G = component.subdifferential(u)
    r0 = g0 + beta * (u - x)
    cols = [G]
    lb = [-np.ones(G.shape[1])]
    ub = [np.ones(G.shape[1])]
    excess = 0.0
    B = component.radius
    if B is not None:
        nu = float(np.linalg.norm(u))
        if nu >= B * (1 - 1e-12):
            cols.append(u[:, None])
            lb.append(np.zeros(1))
            ub.append(np.full(1, np.inf))
        excess = max(0.0, nu - B)
    M = np.hstack(cols)
    if M.shape[1] == 0:
        res = float(np.linalg.norm(r0))
    else:
        sol = lsq_linear(M, -r0, bounds=(np.concatenate(lb), np.concatenate(ub)),
                         method="bvls", tol=1e-14)
        res = float(np.linalg.norm(r0 + M @ sol.x))
    return math.hypot(res, beta * excess)
