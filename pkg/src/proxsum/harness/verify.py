"""Invariant batteries behind ``proxsum verify <suite>``.

Each suite returns a :class:`SuiteReport` listing every check with its
measured slack. ``inject_fault=True`` swaps in a deliberately wrong prox so
the suite's ability to detect violations can itself be tested.
"""
from dataclasses import dataclass, field
import math
import time

import numpy as np

from .. import algorithms as alg
from ..adversary_det import floor_violations, new_adversary, replay_verify
from ..adversary_rand import (check_span_property, pair_floor, pair_gap, phi,
                              random_valid_probe, sample_instance)
from ..oracle import (AbsComponent, HingeComponent, LeastSquaresComponent,
                      LinearComponent, QueryLedger, RegularizedComponent,
                      SquaredNormComponent, ZeroComponent, check_prox_optimality,
                      evaluate_sum)
from ..smoothing import moreau

SUITES = ("moreau", "det_replay", "rand_structure", "prox_oracles")


@dataclass
class Check:
    name: str
    passed: bool
    slack: float
    tol: float
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def violations(self):
        return [c for c in self.checks if not c.passed]

    def add(self, name, value, tol, detail=""):
        """Record a check that passes when ``value <= tol``."""
        self.checks.append(Check(name, bool(value <= tol), float(value), float(tol), detail))

    def to_text(self):
        lines = [f"suite {self.suite}: {len(self.checks)} checks, "
                 f"{len(self.violations)} violations, {self.seconds:.2f}s"]
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            extra = f"  {c.detail}" if c.detail else ""
            lines.append(f"  {flag} {c.name:<48} measured {c.slack:.3e}  tol {c.tol:.1e}{extra}")
        return "\n".join(lines)


class _BadProx:
    """Wrapper whose prox is shifted away from the true one."""

    def __init__(self, base, shift=1e-3):
        self.base = base
        self.shift = shift
        self.dim = base.dim
        self.radius = base.radius

    def value(self, x):
        return self.base.value(x)

    def subgradient(self, x):
        return self.base.subgradient(x)

    def subdifferential(self, x):
        return self.base.subdifferential(x)

    def prox(self, x, beta):
        return self.base.prox(x, beta) + self.shift


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


# moreau -------------------------------------------------------------------------------
def moreau_components():
    """``[(label, component, lipschitz_constant)]`` used by the Moreau suite."""
    rng = _rng(11)
    out = []
    for d in (1, 5):
        a = rng.standard_normal(d)
        out.append((f"abs d={d}", AbsComponent(a, offset=0.3, weight=1.5),
                    1.5 * float(np.linalg.norm(a))))
        b = rng.standard_normal(d)
        out.append((f"hinge d={d}", HingeComponent(b, label=-1.0, weight=0.7),
                    0.7 * float(np.linalg.norm(b))))
    for ai in (0.0, 0.5, 2.0):
        out.append((f"median a={ai}", AbsComponent(np.ones(1), offset=ai), 1.0))
    return out


def suite_moreau(inject_fault=False, samples=40, seed=0):
    """Sandwich, gradient-vs-finite-difference and sampled smoothness of envelopes."""
    rep = SuiteReport("moreau")
    t0 = time.perf_counter()
    rng = _rng(seed)
    for label, comp, L in moreau_components():
        base = _BadProx(comp) if inject_fault else comp
        sand = grad_err = smooth = 0.0
        for beta in (0.1, 1.0, 10.0, 100.0):
            env = moreau(base, beta)
            for _ in range(samples):
                x = rng.standard_normal(comp.dim) * 2.0
                fx = comp.value(x)
                fe, g = env.value_and_gradient(x)
                # f^beta <= f <= f^beta + L^2/(2 beta)
                sand = max(sand, fe - fx, fx - fe - L * L / (2.0 * beta))
                u = rng.standard_normal(comp.dim)
                u /= np.linalg.norm(u)
                h = 1e-6 / max(1.0, beta)
                fd = (env.value(x + h * u) - env.value(x - h * u)) / (2.0 * h)
                grad_err = max(grad_err, abs(fd - g @ u) / max(float(np.linalg.norm(g)), 1e-3))
                y = x + rng.standard_normal(comp.dim) * 10.0 ** rng.uniform(-3, 0)
                gy = env.gradient(y)
                lhs = float(np.linalg.norm(g - gy))
                smooth = max(smooth, (lhs - beta * float(np.linalg.norm(x - y)))
                             / max(1.0, beta * float(np.linalg.norm(x - y))))
        rep.add(f"{label}: sandwich", sand, 1e-9)
        rep.add(f"{label}: gradient vs finite difference", grad_err, 1e-5)
        rep.add(f"{label}: beta-smoothness", smooth, 1e-9)
    rep.seconds = time.perf_counter() - t0
    return rep


# deterministic replay -------------------------------------------------------------------
@dataclass
class GameReport:
    variant: str
    m: int
    eps: float
    k: int
    solver: str
    queries: int
    certified_queries: int
    floor: float
    min_subopt: float
    floor_violations: int
    replay_checked: int
    replay_violations: int

    @property
    def ok(self):
        return (self.floor_violations == 0 and self.replay_violations == 0
                and self.min_subopt >= self.floor - 1e-9)


GAME_SOLVERS = {
    "lipschitz": ("gd", "smoothed_agd", "cyclic_prox"),
    "lipschitz_sc": ("gd", "smoothed_agd", "cyclic_prox"),
    "smooth": ("gd", "agd", "cyclic_prox"),
    "smooth_sc": ("gd", "agd", "cyclic_prox"),
}


def certified_rounds(adv):
    """Number of leading rounds whose query points carry a positive floor."""
    return adv.k // 2 if adv.variant == "smooth" else adv.k


def play_det_game(variant, m, eps, solver, seed=0, probes=200, budget=None, corrupt=False,
                  **params):
    """Play a deterministic solver against the resisting oracle and audit the game.

    The solver gets ``k ceil(m/2) + 3m`` queries unless ``budget`` is given.
    Every query point issued before ``r ceil(m/2)`` queries, with ``r`` the
    number of certified rounds, is checked against the floor on the
    finalized instance; all logged answers are replayed. ``corrupt`` alters
    one logged prox answer as a negative control.
    """
    adv = new_adversary(variant, m, eps, seed=seed, **params)
    prob = adv.problem()
    ledger = QueryLedger(m, keep_points=True, keep_responses=True)
    budget = budget or adv.k * adv.need + 3 * m
    cfg = alg.SolverConfig(budget=budget, cadence=budget)
    if solver == "gd":
        fn = alg.gd if prob.fclass.smooth_gamma is not None else alg.subgradient_descent
        fn(prob, cfg, ledger=ledger)
    elif solver == "agd":
        alg.agd(prob, cfg, ledger=ledger)
    elif solver == "smoothed_agd":
        alg.smoothed_minimize(prob, eps, "deterministic_agd", cfg, ledger=ledger)
    elif solver == "cyclic_prox":
        alg.cyclic_prox(prob, cfg, ledger=ledger)
    else:
        raise ValueError(f"unknown game solver {solver!r}")
    rounds = list(adv.query_rounds)
    points = [r[3] for r in ledger.records]
    final = adv.finalize()
    if corrupt:
        for j, rec in enumerate(ledger.records):
            if rec[4].prox_point is not None:
                resp = rec[4]
                bad = type(resp)(resp.value, resp.gradient, resp.prox_point + 1e-3)
                ledger.records[j] = rec[:4] + (bad,)
                break
    rep = replay_verify(final, ledger, probes=probes, seed=seed)
    viol = floor_violations(adv, final, points, rounds)
    limit = certified_rounds(adv) * adv.need
    f_star = final.optimum[1]
    subs = [evaluate_sum(final, x) - f_star for x in points[:limit]]
    return GameReport(variant, m, eps, adv.k, solver, ledger.total, min(limit, ledger.total),
                      adv.floor_for_round(1), min(subs) if subs else math.inf, len(viol),
                      rep.checked, len(rep.violations))


def suite_det_replay(inject_fault=False, seed=0):
    """Full games of the deterministic solvers on the Lipschitz and smooth adversaries."""
    rep = SuiteReport("det_replay")
    t0 = time.perf_counter()
    games = [("lipschitz", 4, 0.025), ("smooth", 4, 1.0 / (32 * 6.5 ** 2))]
    for variant, m, eps in games:
        for solver in GAME_SOLVERS[variant]:
            g = play_det_game(variant, m, eps, solver, seed=seed, corrupt=inject_fault)
            tag = f"{variant} m={m} k={g.k} {solver}"
            rep.add(f"{tag}: replay violations", g.replay_violations, 0,
                    f"{g.replay_checked} answers")
            rep.add(f"{tag}: floor violations", g.floor_violations, 0, f"{g.queries} queries")
            rep.add(f"{tag}: floor - min subopt", g.floor - g.min_subopt, 1e-9,
                    f"floor {g.floor:.4e}")
    rep.seconds = time.perf_counter() - t0
    return rep


# randomized structure -------------------------------------------------------------------
RAND_CASES = (
    ("lipschitz_pairs", {}, 1e-3),
    ("smooth_pairs", {}, 1e-5),
    ("smooth_sc_pairs", {"lam": 1e-4}, 1e-5),
    ("lipschitz_sc_pairs", {"lam": 0.05}, 1e-3),
)


def suite_rand_structure(inject_fault=False, span_probes=10_000, prox_checks=1000,
                         floor_probes=500, m=8, seed=0):
    """Span property, phi sandwich, pair floors and exact block proxes."""
    rep = SuiteReport("rand_structure")
    t0 = time.perf_counter()
    rng = _rng(seed)
    per_case = max(1, span_probes // len(RAND_CASES))
    for variant, kw, eps in RAND_CASES:
        inst = sample_instance(variant, m, eps, seed=seed + 5, **kw)
        worst = 0.0
        for _ in range(per_case):
            i = int(rng.integers(inst.pairs))
            t = int(rng.integers(0, inst.k + 2))
            x = random_valid_probe(inst, i, t, rng)
            sc = check_span_property(inst, i, x, t, 10.0 ** rng.uniform(-2, 2))
            worst = max(worst, sc.max_forbidden if sc.precondition else math.inf)
        rep.add(f"{variant}: span property ({per_case} probes)", worst, 1e-12)
        gap = 0.0
        n = max(1, prox_checks // len(RAND_CASES))
        for _ in range(n):
            j = int(rng.integers(2 * inst.pairs))
            comp = inst.problem.components[j]
            x = rng.standard_normal(inst.d)
            B = inst.problem.fclass.radius_B
            # about one probe in four lands outside the ball and exercises the constrained prox
            x *= (B * rng.uniform(0.1, 1.3) if B is not None else 1.0) / np.linalg.norm(x)
            beta = 10.0 ** rng.uniform(-1, 2)
            u = comp.prox(x, beta) + (1e-6 if inject_fault else 0.0)
            gap = max(gap, float(np.linalg.norm(u - comp.brute_prox(x, beta))))
        rep.add(f"{variant}: prox vs brute force ({n})", gap, 1e-8)
        if variant in ("lipschitz_pairs", "smooth_pairs"):
            fl, first_r = pair_floor(inst)
            worst = -math.inf
            for _ in range(floor_probes // 2):
                i = int(rng.integers(inst.pairs))
                x = random_valid_probe(inst, i, first_r, rng)
                worst = max(worst, fl - pair_gap(inst, i, x))
            rep.add(f"{variant}: 2 eps - pair gap ({floor_probes // 2} probes)", worst, 0.0,
                    f"floor {fl:.3e}")
    # dyadic grid and widths keep every intermediate exact, so the bound is checked at 0 slack
    z = np.arange(-10240, 10241) / 1024.0
    worst = 0.0
    for c in (2.0 ** -10, 0.125, 0.5, 1.0, 3.0):
        diff = z * z - phi(c, z)[0]
        worst = max(worst, float(-diff.min()), float((diff - 2.0 * c * c).max()))
    rep.add("phi sandwich 0 <= z^2 - phi_c(z) <= 2c^2", worst, 0.0)
    rep.seconds = time.perf_counter() - t0
    return rep


# prox oracles -----------------------------------------------------------------------------
def oracle_components():
    rng = _rng(3)
    d = 6
    A = rng.standard_normal((3, d))
    b = rng.standard_normal(3)
    a = rng.standard_normal(d)
    out = [
        ("zero", ZeroComponent(d)),
        ("squared norm", SquaredNormComponent(d, scale=2.0)),
        ("linear", LinearComponent(a, const=0.5)),
        ("abs", AbsComponent(a, offset=0.2)),
        ("hinge", HingeComponent(a, label=1.0)),
        ("least squares", LeastSquaresComponent(A, b)),
        ("regularized abs", RegularizedComponent(AbsComponent(a, offset=-0.1), 0.3)),
    ]
    out += [(f"{name} on ball", _on_ball(c, 0.8)) for name, c in out[2:5]]
    return out


def _on_ball(comp, B):
    comp.radius = B
    return comp


def suite_prox_oracles(inject_fault=False, samples=60, seed=0):
    """Prox optimality residuals and subgradient inequalities of the oracle components."""
    rep = SuiteReport("prox_oracles")
    t0 = time.perf_counter()
    rng = _rng(seed)
    for label, comp in oracle_components():
        c = _BadProx(comp) if inject_fault else comp
        res = sub = 0.0
        for _ in range(samples):
            x = rng.standard_normal(comp.dim)
            beta = 10.0 ** rng.uniform(-2, 2)
            u = c.prox(x, beta)
            res = max(res, check_prox_optimality(comp, x, beta, u) / beta)
            p = x if comp.radius is None else x * min(1.0, comp.radius / np.linalg.norm(x))
            g = comp.subgradient(p)
            Y = p + rng.standard_normal((20, comp.dim))
            if comp.radius is not None:
                Y *= np.minimum(1.0, comp.radius / np.linalg.norm(Y, axis=1))[:, None]
            fp = comp.value(p)
            sub = max(sub, max(fp + (y - p) @ g - comp.value(y) for y in Y))
        rep.add(f"{label}: prox distance bound", res, 1e-8)
        rep.add(f"{label}: subgradient inequality", sub, 1e-9)
    rep.seconds = time.perf_counter() - t0
    return rep


_SUITE_FUNCS = {
    "moreau": suite_moreau,
    "det_replay": suite_det_replay,
    "rand_structure": suite_rand_structure,
    "prox_oracles": suite_prox_oracles,
}


def verify_suite(name, inject_fault=False, **kw):
    """Run the named suite; see :data:`SUITES`."""
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _SUITE_FUNCS[name](inject_fault=inject_fault, **kw)
