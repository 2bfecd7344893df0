"""Hard instances for randomized algorithms.

The pairs families place ``floor(m/2)`` pairs ``(f_{i,1}, f_{i,2})`` on
disjoint orthonormal blocks ``v_{i,0} .. v_{i,k}``. Each member of a pair
holds every other link of a chain built from the dead-zone helpers
``psi_c`` (Lipschitz) or ``phi_c`` (smooth), so one query can reveal at most
one new direction of its block. With ``z_r = <x, v_{i,r}>``:

``lipschitz_pairs`` (scaled by ``L``, lengths by ``B``)
    ``f_{i,1} = |bB - z_0|/sqrt(2) + sum_{r even} psi_{cB}(z_{r-1} - z_r)/(2 sqrt(k))``,
    ``f_{i,2} = sum_{r odd} psi_{cB}(z_{r-1} - z_r)/(2 sqrt(k))``.
``smooth_pairs``
    ``f_{i,1} = gamma/16 (z_0^2 - 2aB z_0 + sum_{r even} phi_{cB}(z_{r-1} - z_r))``,
    ``f_{i,2} = gamma/16 (sum_{r odd} phi_{cB}(z_{r-1} - z_r) + phi_{cB}(z_k))``.
``smooth_sc_pairs``
    ``gamma (1 - lt)/16`` times the ``smooth_pairs`` chain with anchor ``C``
    and tail weight ``zeta``, plus ``lam/2 ||x||^2``; ``lt = m lam/gamma``.
``lipschitz_sc_pairs``
    ``lipschitz_pairs`` on the ball of radius ``sqrt(eps/lam)`` plus
    ``lam/2 ||x||^2``.
``linear``
    ``f_i = C <x, v_i>`` with ``C = eps sqrt(m)/(0.08 B)``.
``bernoulli``
    One-dimensional ``f_i = L s_i x`` with ``P(s_i = 1) = p``,
    ``p = 1/2 +- 2 eps``.

An odd ``m`` leaves the last component without a partner; it is zero (or
the bare regularizer in the strongly convex families).
"""
from dataclasses import dataclass, field
import configparser
import io
import math
import warnings

import numpy as np
from scipy.optimize import brentq

from .oracle import (ComponentOracle, FunctionClass, LinearComponent, Problem,
                     SquaredNormComponent, ZeroComponent, ball_prox, evaluate_sum)
from .termsum import ABS, PHI, PSI, SQ, SubspaceComponent, TermSum, phi, psi

PAIR_VARIANTS = ("lipschitz_pairs", "lipschitz_sc_pairs", "smooth_pairs", "smooth_sc_pairs")
VARIANTS = PAIR_VARIANTS + ("linear", "bernoulli")
DEFAULT_DIM = 512

__all__ = ["psi", "phi", "RandomHardInstance", "TheoryDimension", "sample_instance",
           "instance_query", "check_span_property", "exact_suboptimality",
           "theory_dimension", "pair_gap", "pair_floor", "random_valid_probe",
           "component_index", "from_text", "save_instance", "load_instance", "VARIANTS",
           "OutsideBallExtension", "extend_outside_ball",
           "PAIR_VARIANTS"]


# one-dimensional proxes ----------------------------------------------------------
def psi_prox(y, w, beta, c):
    """``argmin_s w psi_c(s) + beta/2 (s - y)^2``."""
    a = abs(y)
    if a <= c:
        return y
    if a <= c + w / beta:
        return math.copysign(c, y)
    return y - math.copysign(w / beta, y)


def phi_prox(y, w, beta, c):
    """``argmin_s w phi_c(s) + beta/2 (s - y)^2``."""
    a = abs(y)
    if a <= c:
        return y
    s = (4.0 * w * c + beta * a) / (4.0 * w + beta)
    if s > 2.0 * c:
        s = beta * a / (2.0 * w + beta)
    return math.copysign(s, y)


def _dphi(c, z):
    a = abs(z)
    if a <= c:
        return 0.0
    if a <= 2.0 * c:
        return math.copysign(4.0 * (a - c), z)
    return 2.0 * z


def _pair_prox(y1, y2, w, beta, c, prox1):
    """Prox of ``w kappa(z1 - z2)``: the difference sees ``beta/2``, the sum is kept."""
    sy = y1 - y2
    s = prox1(sy, w, beta / 2.0, c)
    if s == sy:
        return y1, y2
    h = 0.5 * (sy - s)
    return y1 - h, y2 + h


def _pair_tail_prox(y1, y2, w, wt, beta, c):
    """Prox of ``w phi_c(z1 - z2) + wt phi_c(z2)``."""
    if abs(y1 - y2) <= c and abs(y2) <= c:
        return y1, y2

    def g(z2):
        s = phi_prox(y1 - z2, w, beta, c)
        return -w * _dphi(c, s) + wt * _dphi(c, z2) + beta * (z2 - y2)

    lo, hi = min(y1, y2, 0.0) - 1.0, max(y1, y2, 0.0) + 1.0
    while g(lo) > 0:
        lo -= 2.0 * (hi - lo)
    while g(hi) < 0:
        hi += 2.0 * (hi - lo)
    z2 = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    return z2 + phi_prox(y1 - z2, w, beta, c), z2


class _BlockProx:
    """Exact prox of one pair member in block coordinates ``z_0 .. z_k``.

    Parameters
    ----------
    k : int
    links : list of int
        Chain links ``r`` (coupling ``z_{r-1}`` and ``z_r``) held by this member.
    kind : PSI or PHI
    w, c : float
        Link weight and dead-zone width.
    anchor : tuple or None
        ``("abs", weight, target)`` or ``("sq", weight, target)`` on ``z_0``
        for ``weight |z_0 - target|`` or ``weight (z_0^2 - 2 target z_0)``.
    tail : float
        Weight of ``phi_c(z_k)`` (0 for none).
    """

    def __init__(self, k, links, kind, w, c, anchor=None, tail=0.0):
        self.k, self.links, self.kind = k, list(links), kind
        self.w, self.c, self.anchor, self.tail = float(w), float(c), anchor, float(tail)
        self.prox1 = psi_prox if kind == PSI else phi_prox

    def __call__(self, z, beta):
        out = np.array(z, dtype=float)
        k, w, c = self.k, self.w, self.c
        if self.anchor is not None:
            kind, wa, tgt = self.anchor
            if kind == "abs":
                d = out[0] - tgt
                out[0] = tgt + math.copysign(max(abs(d) - wa / beta, 0.0), d)
            else:
                out[0] = (beta * out[0] + 2.0 * wa * tgt) / (beta + 2.0 * wa)
        tail_done = False
        for r in self.links:
            if self.tail and r == k:
                out[k - 1], out[k] = _pair_tail_prox(out[k - 1], out[k], w, self.tail, beta, c)
                tail_done = True
            else:
                out[r - 1], out[r] = _pair_prox(out[r - 1], out[r], w, beta, c, self.prox1)
        if self.tail and not tail_done:
            out[k] = phi_prox(out[k], self.tail, beta, c)
        return out


# instances --------------------------------------------------------------------------
@dataclass
class RandomHardInstance:
    """A sampled hard instance and its problem view.

    Components are indexed ``0 .. m-1``; pair ``i`` (0-based) owns
    components ``2i`` (its ``f_{i,1}``) and ``2i + 1`` (its ``f_{i,2}``).
    ``vectors`` holds ``v_{i,r}`` in row ``i (k+1) + r`` for pairs families and
    ``v_i`` in row ``i`` for ``linear``.
    """

    variant: str
    m: int
    k: int
    d: int
    seed: int
    eps: float
    constants: dict
    params: dict
    vectors: np.ndarray
    problem: Problem
    optimum: tuple | None
    signs: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return self.m // 2

    def block(self, i):
        k1 = self.k + 1
        return self.vectors[i * k1:(i + 1) * k1]

    def to_text(self):
        """Seed, variant and parameters; vectors are regenerated from the seed."""
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep constant names such as L and B
        cp["instance"] = {"variant": self.variant, "m": str(self.m), "d": str(self.d),
                          "seed": str(self.seed), "eps": repr(self.eps)}
        cp["constants"] = {key: repr(v) for key, v in self.constants.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def from_text(text):
    """Rebuild an instance serialized by :meth:`RandomHardInstance.to_text`."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep constant names such as L and B
    cp.read_string(text)
    s = cp["instance"]
    consts = {key: (None if v == "None" else float(v)) for key, v in cp["constants"].items()}
    return sample_instance(s["variant"], int(s["m"]), float(s["eps"]), d=int(s["d"]),
                           seed=int(s["seed"]), **consts)


def save_instance(inst, path):
    with open(path, "w") as fh:
        fh.write(inst.to_text())


def load_instance(path):
    with open(path) as fh:
        return from_text(fh.read())


def _orthonormal(rng, d, n):
    """``n`` orthonormal rows from Gaussian draws (QR with a sign convention)."""
    if n == 0:
        return np.zeros((0, d))
    G = rng.standard_normal((d, n))
    Q, R = np.linalg.qr(G)
    sgn = np.where(np.diag(R) < 0, -1.0, 1.0)
    return (Q * sgn).T.copy()


def _rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def sample_instance(variant, m, eps, L=1.0, B=1.0, gamma=1.0, lam=0.0, eps0=None,
                    d=None, seed=0):
    """Sample a hard instance.

    Parameters
    ----------
    variant : str
        One of :data:`VARIANTS`.
    m : int
    eps : float
        Target accuracy the parameters are tuned for.
    L, B, gamma, lam : float
        Class constants; only those used by the variant matter.
    eps0 : float, optional
        Initial suboptimality for ``smooth_sc_pairs`` (default
        ``max(60/sqrt(lt), 10/lt) eps`` with ``lt = m lam/gamma``, the smallest
        round value meeting both regime conditions).
    d : int, optional
        Ambient dimension; defaults to ``max(512, required)``.
    seed : int

    Returns
    -------
    RandomHardInstance
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if m < 2:
        raise ValueError("m must be at least 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    constants = {"L": float(L), "B": float(B), "gamma": float(gamma), "lam": float(lam),
                 "eps0": None if eps0 is None else float(eps0)}
    if variant == "bernoulli":
        return _bernoulli(m, eps, constants, seed)
    if variant == "linear":
        return _linear(m, eps, constants, d, seed)
    return _pairs(variant, m, eps, constants, d, seed)


def _dimension(d, need):
    if d is None:
        return max(DEFAULT_DIM, need)
    if d < need:
        raise ValueError(f"dimension {d} is below the structural minimum {need}")
    return int(d)


def _linear(m, eps, consts, d, seed):
    B, L = consts["B"], consts["L"]
    d = _dimension(d, m)
    C = eps * math.sqrt(m) / (0.08 * B)
    if C > L:
        warnings.warn(f"linear instance needs Lipschitz constant {C:.4g} > L")
    V = _orthonormal(_rng(seed), d, m)
    comps = [LinearComponent(C * V[i], radius=B) for i in range(m)]
    x_star = -(B / math.sqrt(m)) * V.sum(axis=0)
    f_star = -C * B / math.sqrt(m)
    prob = Problem(comps, FunctionClass(lipschitz_L=max(C, L), smooth_gamma=0.0, radius_B=B),
                   optimum=(x_star, f_star), eps0=-f_star, name="rand-linear")
    return RandomHardInstance("linear", m, 0, d, seed, eps, consts, {"C": C}, V, prob,
                              (x_star, f_star))


def _bernoulli(m, eps, consts, seed):
    L, B = consts["L"], consts["B"]
    if not 10.0 / math.sqrt(m) < eps / (L * B) < 0.25:
        warnings.warn("bernoulli instance expects 10/sqrt(m) < eps/(LB) < 1/4")
    rng = _rng(seed)
    sigma = 1.0 if rng.random() < 0.5 else -1.0
    p = 0.5 + sigma * 2.0 * eps / (L * B)
    signs = np.where(rng.random(m) < p, 1.0, -1.0)
    # only two distinct components exist; share them across indices
    up, down = LinearComponent(np.array([L]), radius=B), LinearComponent(np.array([-L]), radius=B)
    comps = [up if s > 0 else down for s in signs]
    Y = float(signs.sum())
    x_star = np.array([-math.copysign(B, Y) if Y != 0 else 0.0])
    f_star = -abs(Y) / m * L * B
    prob = Problem(comps, FunctionClass(lipschitz_L=L, smooth_gamma=0.0, radius_B=B),
                   optimum=(x_star, f_star), eps0=-f_star, name="rand-bernoulli")
    return RandomHardInstance("bernoulli", m, 0, 1, seed, eps, consts, {"p": p}, np.ones((1, 1)),
                              prob, (x_star, f_star), signs=signs)


def _pair_params(variant, m, eps, consts):
    L, B, g, lam = consts["L"], consts["B"], consts["gamma"], consts["lam"]
    par = {}
    if variant in ("lipschitz_pairs", "lipschitz_sc_pairs"):
        if variant == "lipschitz_sc_pairs":
            if not lam > 0:
                raise ValueError("lipschitz_sc_pairs needs lam > 0")
            B = math.sqrt(eps / lam)
        e = eps / (L * B)
        if not e < 1.0 / (10.0 * math.sqrt(m)):
            warnings.warn("eps >= LB/(10 sqrt(m)): the chain has no links")
        k = max(1, math.floor(1.0 / (10.0 * e * math.sqrt(m))))
        par.update(k=k, b=math.sqrt(2.0 / (m * (k + 1))), c=e / math.sqrt(k), B=B)
    elif variant == "smooth_pairs":
        e = eps / (g * B * B)
        if not e < 1.0 / (320.0 * m):
            warnings.warn("eps >= gamma B^2/(320 m): fewer than two links")
        k = max(1, math.floor(1.0 / math.sqrt(80.0 * e * m)))
        par.update(k=k, a=math.sqrt(6.0 / (m * (k + 1))), c=math.sqrt(16.0 * e / k), B=B)
    else:
        if not lam > 0:
            raise ValueError("smooth_sc_pairs needs lam > 0")
        lt = m * lam / g
        if not lt < 1:
            raise ValueError("smooth_sc_pairs needs m lam < gamma")
        if not lt < 1.0 / 73.0:
            warnings.warn("m lam/gamma >= 1/73 is outside the hardness regime")
        e = eps / g
        if consts["eps0"] is None:
            e0 = max(60.0 / math.sqrt(lt), 10.0 / lt) * e
        else:
            e0 = consts["eps0"] / g
        if e0 / e < 60.0 / math.sqrt(lt):
            warnings.warn("eps0/eps < 60/sqrt(m lam/gamma) is outside the hardness regime")
        Qt = 0.5 * (1.0 / lt - 1.0) + 1.0
        sq = math.sqrt(Qt)
        qt = (sq - 1.0) / (sq + 1.0)
        zeta = 2.0 / (sq + 1.0)
        C = math.sqrt(8.0 * m * e0 / ((m // 2) * lt * (sq - 1.0) ** 2))
        if C <= 12.0 * math.sqrt(e) / (lt * (sq - 1.0)):
            warnings.warn("C <= 12 sqrt(eps)/(lt (sqrt(Q) - 1)) is outside the hardness regime")
        e0_pair = 0.5 * lt * C * C / 8.0 * (sq - 1.0) ** 2
        arg = e0_pair / (20.0 * sq * e)
        t = math.floor((sq - 1.0) / 4.0 * math.log(arg)) if arg > 1 else 0
        k = max(1, math.ceil(t - 1.0 / (2.0 * math.log(qt))) - 1)
        c = math.sqrt(16.0 * e / ((1.0 - lt) * (k + zeta)))
        par.update(k=k, lt=lt, Q=Qt, q=qt, zeta=zeta, C=C, c=c, t=t, eps0_hat=e0)
    return par


def _member(variant, j, par, consts):
    """TermSum and block prox of pair member ``j`` (1 or 2)."""
    k, c = par["k"], par["c"]
    L, g, lam = consts["L"], consts["gamma"], consts["lam"]
    ts = TermSum(k + 1)
    links = [r for r in range(1, k + 1) if r % 2 == (0 if j == 1 else 1)]
    anchor, tail = None, 0.0
    if variant in ("lipschitz_pairs", "lipschitz_sc_pairs"):
        B = par["B"]
        kind, w, cc = PSI, L / (2.0 * math.sqrt(k)), c * B
        if j == 1:
            wa, tgt = L / math.sqrt(2.0), par["b"] * B
            ts.add(ABS, wa, {0: 1.0}, tgt)
            anchor = ("abs", wa, tgt)
    else:
        kind = PHI
        if variant == "smooth_pairs":
            B = par["B"]
            w, cc, tgt, zt = g / 16.0, c * B, par["a"] * B, 1.0
        else:
            w, cc, tgt, zt = g * (1.0 - par["lt"]) / 16.0, c, par["C"], par["zeta"]
        if j == 1:
            ts.add(SQ, w, {0: 1.0})
            lin = np.zeros(k + 1)
            lin[0] = -2.0 * w * tgt
            ts.add_linear(lin)
            anchor = ("sq", w, tgt)
        else:
            tail = w * zt
            ts.add(PHI, tail, {k: 1.0}, 0.0, cc)
    for r in links:
        ts.add(kind, w, {r - 1: 1.0, r: -1.0}, 0.0, cc)
    return ts, _BlockProx(k, links, kind, w, cc, anchor, tail)


def _pairs(variant, m, eps, consts, d, seed):
    par = _pair_params(variant, m, eps, consts)
    k = par["k"]
    need = (k + 1) * ((m + 1) // 2)
    d = _dimension(d, need)
    V = _orthonormal(_rng(seed), d, need)
    sc = variant.endswith("_sc_pairs")
    mu = consts["lam"] if sc else 0.0
    radius = None if variant == "smooth_sc_pairs" else par["B"]
    members = [_member(variant, j, par, consts) for j in (1, 2)]
    comps = []
    for i in range(m // 2):
        Vi = V[i * (k + 1):(i + 1) * (k + 1)]
        for ts, fast in members:
            comps.append(SubspaceComponent(Vi, ts, mu=mu, radius=radius, fast_prox=fast, dim=d))
    if m % 2:
        comps.append(SquaredNormComponent(d, mu, radius=radius) if sc
                     else ZeroComponent(d, radius=radius))
    fclass = _pair_class(variant, consts, par)
    prob = Problem(comps, fclass, name=f"rand-{variant}", meta={"k": k})
    x_star, f_star = _pair_optimum(variant, m, par, members, V, consts)
    prob.optimum = (x_star, f_star)
    prob.eps0 = evaluate_sum(prob, np.zeros(d)) - f_star
    inst = RandomHardInstance(variant, m, k, d, seed, eps, consts, par, V, prob, (x_star, f_star))
    inst.meta["members"] = members
    return inst


def _pair_class(variant, consts, par):
    L, g, lam = consts["L"], consts["gamma"], consts["lam"]
    if variant == "lipschitz_pairs":
        return FunctionClass(lipschitz_L=L, radius_B=par["B"])
    if variant == "lipschitz_sc_pairs":
        return FunctionClass(lipschitz_L=L + lam * par["B"], strong_lambda=lam, radius_B=par["B"])
    if variant == "smooth_pairs":
        return FunctionClass(smooth_gamma=g, radius_B=par["B"])
    return FunctionClass(smooth_gamma=g, strong_lambda=lam)


def _pair_optimum(variant, m, par, members, V, consts):
    """Minimizer and value of ``F``.

    Pairs live on orthogonal blocks and are identical in block coordinates,
    so by symmetry and convexity every block takes the same coordinates
    ``z``, minimizing ``T(z) + mu_pair/2 ||z||^2`` over ``||z|| <= B/sqrt(pairs)``.
    """
    k, np_ = par["k"], m // 2
    d = V.shape[1]
    T = TermSum(k + 1)
    for ts, _ in members:
        for row in ts._rows:
            T._rows.append(row)
        T.lin = T.lin + ts.lin
    if variant == "lipschitz_pairs":
        z = np.full(k + 1, par["b"] * par["B"])
        val = 0.0
    else:
        if variant == "smooth_pairs":
            mu = 1e-10 * consts["gamma"]
        else:
            mu = m * consts["lam"]
        rad = None if variant == "smooth_sc_pairs" else par["B"] / math.sqrt(np_)
        z = ball_prox(T.brute_prox, np.zeros(k + 1), mu, rad)
        val = T.value(z)
        if variant != "smooth_pairs":
            val += 0.5 * mu * float(z @ z)
    x_star = np.zeros(d)
    for i in range(np_):
        x_star += V[i * (k + 1):(i + 1) * (k + 1)].T @ z
    return x_star, np_ * val / m


# continuation outside the ball -------------------------------------------------------
class OutsideBallExtension(ComponentOracle):
    """Continuation of a pairs component beyond ``||x|| = B``.

    With ``p = B x/||x||`` and ``d = x - p`` outside the ball:
    ``kind="lipschitz"`` gives ``f(p) + L ||d||``; ``kind="smooth"`` gives the
    first-order continuation ``f(p) + <grad f(p), d>``; ``kind="smooth_sc"``
    adds ``lam/2 ||d||^2`` to it. Inside the ball the component is unchanged.
    Every answer outside depends only on ``f`` near ``p``. Values and
    (sub)gradients only: the prox of the continued function is not offered.
    """

    def __init__(self, base, B, kind, L=1.0, lam=0.0):
        if kind not in ("lipschitz", "smooth", "smooth_sc"):
            raise ValueError(f"unknown continuation {kind!r}")
        self.base, self.B, self.kind = base, float(B), kind
        self.L, self.lam = float(L), float(lam)
        self.dim = base.dim
        self.radius = None

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        if r <= self.B:
            return x, None, r
        return x * (self.B / r), x, r

    def value(self, x):
        p, x, r = self._split(x)
        fp = self.base.value(p)
        if x is None:
            return fp
        d = x - p
        if self.kind == "lipschitz":
            return fp + self.L * (r - self.B)
        out = fp + float(self.base.subgradient(p) @ d)
        if self.kind == "smooth_sc":
            out += 0.5 * self.lam * float(d @ d)
        return out

    def subgradient(self, x):
        p, x, r = self._split(x)
        g = self.base.subgradient(p)
        if x is None:
            return g
        u = x / r
        d = x - p
        if self.kind == "lipschitz":
            # chain rule through p(x): dp/dx = (B/r)(I - u u^T)
            return (self.B / r) * (g - u * float(u @ g)) + self.L * u
        V, ts = self.base.V, self.base.ts
        hd = V.T @ ts.hessian_vector(V @ p, V @ d) + self.base.mu * d
        out = g + (self.B / r) * (hd - u * float(u @ hd))
        if self.kind == "smooth_sc":
            out = out + self.lam * d
        return out

    def _prox(self, x, beta):
        raise NotImplementedError("the continued components answer values and gradients only")


def extend_outside_ball(inst, B=None):
    """Problem whose pairs components follow :class:`OutsideBallExtension` (off by default).

    ``B`` defaults to the instance radius; ``smooth_sc_pairs`` has none and
    uses ``sqrt(2 eps0/lam)``, the radius known to hold the optimum.
    """
    v = inst.variant
    if v not in PAIR_VARIANTS:
        raise ValueError("continuation applies to pairs families only")
    fc = inst.problem.fclass
    if B is None:
        B = fc.radius_B
        if B is None:
            B = math.sqrt(2.0 * inst.problem.eps0 / inst.constants["lam"])
    if v in ("lipschitz_pairs", "lipschitz_sc_pairs"):
        kind, L, lam = "lipschitz", fc.lipschitz_L, 0.0
    else:
        kind, L, lam = ("smooth" if v == "smooth_pairs" else "smooth_sc"), None, fc.strong_lambda
    comps = []
    for c in inst.problem.components:
        if isinstance(c, SubspaceComponent):
            base = SubspaceComponent(c.V, c.ts, mu=c.mu, radius=None, dim=c.dim)
            comps.append(OutsideBallExtension(base, B, kind, L=L or 1.0, lam=lam))
        else:
            comps.append(c)
    new_fc = FunctionClass(lipschitz_L=fc.lipschitz_L, smooth_gamma=fc.smooth_gamma,
                           strong_lambda=fc.strong_lambda)
    return Problem(comps, new_fc, optimum=inst.optimum, name=inst.problem.name + "+ext")


# queries and checks ----------------------------------------------------------------
def component_index(inst, i, j):
    if inst.variant not in PAIR_VARIANTS:
        raise ValueError("pair indexing applies to pairs families only")
    if not 0 <= i < inst.pairs or j not in (1, 2):
        raise ValueError("pair index out of range")
    return 2 * i + (j - 1)


def instance_query(inst, i, j, x, beta, want_prox=True):
    """``(value, subgradient, prox)`` of ``f_{i,j}`` at ``x``.

    For ``linear`` and ``bernoulli`` the component index is ``i`` and ``j``
    is ignored.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    idx = component_index(inst, i, j) if inst.variant in PAIR_VARIANTS else i
    return inst.problem.components[idx].respond(np.asarray(x, dtype=float), beta, want_prox)


@dataclass
class SpanCheck:
    ok: bool
    precondition: bool
    max_forbidden: float = 0.0
    max_residual: float = 0.0
    detail: dict = field(default_factory=dict)


def _allowed_residual(w, x, Va):
    """Part of ``w`` outside ``span{x, rows of Va}``."""
    w = w - Va.T @ (Va @ w)
    xr = x - Va.T @ (Va @ x)
    nx = float(xr @ xr)
    if nx > 1e-300:
        w = w - (float(w @ xr) / nx) * xr
    return w


def check_span_property(inst, i, x, t, beta, tol=1e-12, enforce_precondition=True):
    """Verify that answers about pair ``i`` reveal at most one new direction.

    With ``|<x, v_{i,r}>| < c/2`` for all ``r >= t``: for ``t`` even the
    subgradient and prox of ``f_{i,1}`` stay in ``span{x, v_{i,0..t}}`` and
    those of ``f_{i,2}`` in ``span{x, v_{i,0..t-1}}``; for ``t`` odd the roles
    swap. Returns a :class:`SpanCheck`; a violated precondition is reported
    with ``precondition=False`` and ``ok=False`` unless
    ``enforce_precondition`` is off, in which case the containments are
    checked anyway (useful as a negative control).
    """
    x = np.asarray(x, dtype=float)
    k = inst.k
    Vi = inst.block(i)
    z = Vi @ x
    cw = inst.params["c"] * inst.params.get("B", 1.0)
    if inst.variant == "smooth_sc_pairs":
        cw = inst.params["c"]
    pre = not (t < k + 1 and np.any(np.abs(z[t:]) >= cw / 2.0))
    if not pre and enforce_precondition:
        return SpanCheck(False, False, detail={"reason": "|<x, v_{i,r}>| >= c/2 for some r >= t"})
    out = SpanCheck(True, pre)
    for j in (1, 2):
        reach = t if (t % 2 == 0) == (j == 1) else t - 1
        Va = Vi[: max(reach + 1, 0)]
        Vf = Vi[max(reach + 1, 0):]
        resp = instance_query(inst, i, j, x, beta)
        for name, vec in (("gradient", resp.gradient), ("prox", resp.prox_point)):
            res = _allowed_residual(vec, x, Va)
            forb = float(np.abs(Vf @ res).max(initial=0.0))
            out.max_forbidden = max(out.max_forbidden, forb)
            out.max_residual = max(out.max_residual, float(np.abs(res).max()))
            out.detail[(j, name)] = forb
            if forb > tol:
                out.ok = False
    return out


def exact_suboptimality(inst, x):
    """``F(x) - F*`` with the optimum attached at sampling."""
    if inst.optimum is None:
        raise ValueError("instance has no attached optimum")
    return evaluate_sum(inst.problem, np.asarray(x, dtype=float)) - inst.optimum[1]


def pair_gap(inst, i, x):
    """``((f_{i,1} + f_{i,2})(x) - (f_{i,1} + f_{i,2})(x*))/2``."""
    comps = inst.problem.components
    a, b = comps[2 * i], comps[2 * i + 1]
    xs = inst.optimum[0]
    return 0.5 * (a.value(x) + b.value(x) - a.value(xs) - b.value(xs))


def pair_floor(inst):
    """Lower bound on :func:`pair_gap` for points that have not reached the chain's end.

    Returns ``(floor, first_r)``: the bound holds when ``|<x, v_{i,r}>| < c/2``
    for every ``r >= first_r``.
    """
    if inst.variant == "lipschitz_pairs":
        return 2.0 * inst.eps, inst.k
    if inst.variant == "smooth_pairs":
        return 2.0 * inst.eps, inst.k // 2
    raise ValueError("pair floor is available for lipschitz_pairs and smooth_pairs")


@dataclass(frozen=True)
class TheoryDimension:
    N: int
    B: float
    c: float
    k: int
    delta_fail: float
    d_required: int


def theory_dimension(B, N, c, k, delta_fail):
    """``ceil(32 B^2 N / c^2 * ln(k N / delta_fail))`` (natural log); 0 when ``N = 0``."""
    if not (B > 0 and c > 0 and k > 0 and 0 < delta_fail < 1) or N < 0:
        raise ValueError("theory_dimension needs positive B, c, k, N >= 0 and delta in (0, 1)")
    if N == 0:
        return TheoryDimension(0, B, c, k, delta_fail, 0)
    val = 32.0 * B * B * N / (c * c) * math.log(k * N / delta_fail)
    return TheoryDimension(N, B, c, k, delta_fail, max(0, math.ceil(val)))


def random_valid_probe(inst, i, t, rng):
    """Random point satisfying the precondition of :func:`check_span_property`.

    Coordinates ``r < t`` on the block of pair ``i`` are free, those with
    ``r >= t`` lie strictly inside ``(-c/2, c/2)`` and a random component
    orthogonal to the block is added.
    """
    k = inst.k
    Vi = inst.block(i)
    cw = inst.params["c"] * (1.0 if inst.variant == "smooth_sc_pairs" else inst.params["B"])
    scale = inst.params.get("b", inst.params.get("a", 0.3)) * inst.params.get("B", 1.0)
    z = np.empty(k + 1)
    z[:t] = rng.normal(scale, scale, size=min(t, k + 1))
    z[t:] = rng.uniform(-0.49, 0.49, size=k + 1 - min(t, k + 1)) * cw
    g = rng.standard_normal(inst.d)
    g -= Vi.T @ (Vi @ g)
    x = Vi.T @ z + g * (scale / math.sqrt(inst.d))
    B = inst.problem.fclass.radius_B
    if B is not None and np.linalg.norm(x) > B:
        # shrink the free part only so the small coordinates keep their bound
        x *= 0.99 * B / np.linalg.norm(x)
    return x
