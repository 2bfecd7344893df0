import math

import numpy as np
import pytest

from proxsum.adversary_rand import sample_instance
from proxsum.algorithms import (SVRGHandle, SolverConfig, agd, catalyst_accelerate,
                                cyclic_prox, gd, regularize_reduce, smoothed_minimize,
                                subgradient_sgd, svrg, svrg_certified_epoch_length)
from proxsum.instances import least_squares_problem, median_problem
from proxsum.oracle import (AbsComponent, FunctionClass, Problem, QueryLedger,
                            SquaredNormComponent, evaluate_sum)
from proxsum.trace import as_view


def _quadratic(m=1, gamma=1.0, lam=0.0, d=1):
    comps = [SquaredNormComponent(d, scale=gamma) for _ in range(m)]
    return Problem(comps, FunctionClass(smooth_gamma=gamma, strong_lambda=lam),
                   optimum=(np.zeros(d), 0.0))


def _ls(m=8, d=5):
    return least_squares_problem(m, d, ridge=0.0, seed=1)


# gradient descent -------------------------------------------------------------------
def test_gd_one_step_reaches_minimizer():
    tr = gd(_quadratic(), SolverConfig(budget=1), x0=np.ones(1))
    assert tr.final[0] == 0.0


def test_gd_two_queries_per_iteration():
    led = QueryLedger(2)
    gd(_quadratic(m=2), SolverConfig(budget=10), x0=np.ones(1), ledger=led)
    assert led.total == 10
    assert list(led.counts) == [5, 5]


def test_gd_sublinear_bound_every_iteration():
    p = _ls()
    xs, fs = p.optimum
    x0 = np.ones(p.dim)
    tr = gd(p, SolverConfig(budget=8 * 200, cadence=8), x0=x0)
    r2 = float(np.sum((x0 - xs) ** 2))
    gamma = p.fclass.smooth_gamma
    for q, sub in zip(tr.queries[1:], tr.subopt[1:]):
        k = q // 8
        assert sub <= gamma * r2 / (2 * k) + 1e-12


# accelerated gradient -----------------------------------------------------------------
def test_agd_strongly_convex_scalar():
    p = _quadratic(gamma=1.0, lam=1.0)
    tr = agd(p, SolverConfig(budget=100, cadence=1, target=1e-10), x0=np.array([2.0]))
    assert tr.queries_to_target is not None and tr.queries_to_target <= 100


def test_agd_convex_bound_every_iteration():
    p = _ls()
    xs, _ = p.optimum
    x0 = np.ones(p.dim)
    tr = agd(p, SolverConfig(budget=8 * 300, cadence=8), x0=x0)
    r2 = float(np.sum((x0 - xs) ** 2))
    gamma = p.fclass.smooth_gamma
    for q, sub in zip(tr.queries[1:], tr.subopt[1:]):
        k = q // 8
        assert sub <= 2 * gamma * r2 / (k + 1) ** 2 + 1e-12


def test_agd_beats_gd_on_ill_conditioned_least_squares():
    p = least_squares_problem(16, 20, kappa=1e3, seed=2)
    cfg = SolverConfig(budget=16 * 400, cadence=16)
    assert agd(p, cfg).subopt[-1] < gd(p, cfg).subopt[-1]


# stochastic subgradient ---------------------------------------------------------------
@pytest.mark.parametrize("T", [100, 10_000])
def test_sgd_abs_rate(T):
    p = Problem([AbsComponent(np.ones(1), radius=1.0)],
                FunctionClass(lipschitz_L=1.0, radius_B=1.0), optimum=(np.zeros(1), 0.0))
    tr = subgradient_sgd(p, SolverConfig(budget=T, seed=3), x0=np.ones(1))
    assert p.suboptimality(tr.final) <= 3.0 / math.sqrt(T)


def test_sgd_bernoulli_sign_recovery():
    eps = 0.05
    T = math.floor(1.0 / (128 * eps * eps))
    hits = 0
    trials = 400
    for s in range(trials):
        inst = sample_instance("bernoulli", m=50_000, eps=eps, seed=s)
        inst.problem.optimum = None  # only the final sign matters; skip measuring F
        tr = subgradient_sgd(inst.problem, SolverConfig(budget=T, seed=10_000 + s))
        p = inst.params["p"]
        # F(x) = L (2p-1) x in expectation, minimized at -B sign(2p-1)
        hits += bool(np.sign(tr.final[0]) == -np.sign(2 * p - 1))
    assert hits / trials > 0.5


def test_sgd_deterministic_for_seed():
    p = median_problem(16)
    cfg = SolverConfig(budget=500, seed=11, cadence=7)
    assert subgradient_sgd(p, cfg).to_bytes() == subgradient_sgd(p, cfg).to_bytes()
    other = subgradient_sgd(p, SolverConfig(budget=500, seed=12, cadence=7))
    assert other.to_bytes() != subgradient_sgd(p, cfg).to_bytes()


# SVRG -------------------------------------------------------------------------------------
def test_svrg_requires_strong_convexity():
    with pytest.raises(ValueError):
        svrg(_ls(), SolverConfig())


def test_svrg_single_component_converges():
    p = _quadratic(m=1, gamma=1.0, lam=1.0)
    tr = svrg(p, SolverConfig(budget=2000, target=1e-12, cadence=1), x0=np.ones(1))
    assert tr.queries_to_target is not None


def test_svrg_epoch_query_accounting():
    p = least_squares_problem(10, 4, kappa=10.0)
    led = QueryLedger(10)
    svrg(p, SolverConfig(budget=3 * (10 + 7), epoch_length=7), ledger=led)
    # each epoch: one anchor query per component plus one per inner step
    assert led.total == 51
    # records are (query_index, component, beta, point)
    assert [r[1] for r in led.records[:10]] == list(range(10))


def _epoch_subopts(p, seed, epochs):
    view = as_view(p)
    n = svrg_certified_epoch_length(view)
    cadence = p.m + n
    tr = svrg(p, SolverConfig(budget=epochs * cadence, epoch_length=n, seed=seed,
                              cadence=cadence))
    return np.array([s for s in tr.subopt if s is not None])


def test_svrg_linear_rate_fit():
    p = least_squares_problem(64, 50, kappa=100.0, seed=0)
    subs = np.median([_epoch_subopts(p, s, 10) for s in range(3)], axis=0)
    keep = subs > 1e-13
    k = np.arange(subs.size)[keep]
    y = np.log(subs[keep])
    slope, icpt = np.polyfit(k, y, 1)
    resid = y - (slope * k + icpt)
    r2 = 1 - resid @ resid / np.sum((y - y.mean()) ** 2)
    assert slope < 0 and r2 >= 0.98


def test_svrg_certified_epoch_contracts():
    p = least_squares_problem(64, 50, kappa=100.0, seed=0)
    subs = np.median([_epoch_subopts(p, s, 6) for s in range(5)], axis=0)
    ratios = subs[:-1] / subs[1:]
    assert np.all(ratios[:5] >= 1.5)


# Catalyst ---------------------------------------------------------------------------------
def test_catalyst_kappa_zero_is_inner_solver():
    p = least_squares_problem(16, 8, kappa=20.0)
    inner = SVRGHandle(seed=4, epoch_length=32)
    tr_c = catalyst_accelerate(inner, p, SolverConfig(budget=480, kappa=0.0, inner_epochs=10))
    tr_s = svrg(p, SolverConfig(budget=480, seed=4, epoch_length=32, step=0.1 / p.fclass.smooth_gamma))
    np.testing.assert_allclose(tr_c.final, tr_s.final, rtol=0, atol=1e-14)


def test_catalyst_beats_plain_svrg_when_ill_conditioned():
    p = least_squares_problem(64, 50, kappa=1e4, seed=5)
    budget, target = 200_000, 1e-6
    cfg = SolverConfig(budget=budget, target=target, seed=0, cadence=64)
    inner = SVRGHandle(seed=0, epoch_length=128, step_scale=0.3, epochs=1)
    q_cat = catalyst_accelerate(inner, p, cfg).queries_to_target
    q_svrg = svrg(p, cfg).queries_to_target
    assert q_cat is not None
    assert q_svrg is None or q_cat < q_svrg


def test_catalyst_respects_budget():
    p = least_squares_problem(16, 8, kappa=200.0)
    led = QueryLedger(16)
    catalyst_accelerate(SVRGHandle(epoch_length=32), p, SolverConfig(budget=1000, inner_epochs=2),
                        ledger=led)
    assert led.total <= 1000


def test_catalyst_rejects_uncertified_inner_epoch():
    p = least_squares_problem(16, 8, kappa=200.0)
    with pytest.raises(ValueError):
        catalyst_accelerate(SVRGHandle(epoch_length=32), p, SolverConfig(budget=1000))


# reductions and smoothing pipelines ------------------------------------------------------
def test_regularize_reduce_lambda_and_values():
    p = median_problem(4, B=1.0)
    r = regularize_reduce(p, 0.1, B=1.0)
    assert r.fclass.strong_lambda == pytest.approx(0.1, rel=1e-15)
    assert r.meta["reg_lambda"] == pytest.approx(0.1, rel=1e-15)
    assert evaluate_sum(r, np.zeros(1)) == evaluate_sum(p, np.zeros(1))
    x = np.array([0.5])
    assert evaluate_sum(r, x) == pytest.approx(evaluate_sum(p, x) + 0.05 * 0.25, abs=1e-15)


def test_regularize_reduce_needs_radius():
    p = Problem([AbsComponent(np.ones(1))], FunctionClass(lipschitz_L=1.0))
    with pytest.raises(ValueError):
        regularize_reduce(p, 0.1)


def test_smoothed_agd_median_example():
    p = median_problem(3, B=3.0, a=[0.0, 1.0, 2.0])
    tr = smoothed_minimize(p, 0.01, "deterministic_agd", SolverConfig(budget=10**6))
    assert evaluate_sum(p, tr.final) - 2.0 / 3.0 < 0.01


def test_randomized_accel_beats_deterministic_on_large_median():
    m, eps = 64, 0.005
    p = median_problem(m)
    q_det = smoothed_minimize(p, eps, "deterministic_agd",
                              SolverConfig(budget=10**6, target=eps, cadence=m)).queries_to_target
    q_rnd = [smoothed_minimize(p, eps, "randomized_accel",
                               SolverConfig(budget=10**6, target=eps, seed=s, cadence=m,
                                            inner_step_scale=0.3)).queries_to_target
             for s in range(3)]
    assert q_det is not None and None not in q_rnd
    assert np.median(q_rnd) < q_det


def test_smoothed_minimize_rejects_unknown_mode():
    with pytest.raises(ValueError):
        smoothed_minimize(median_problem(2), 0.1, "bogus")


# invariants ---------------------------------------------------------------------------------
SOLVER_CASES = [
    ("gd", lambda: least_squares_problem(8, 4, kappa=10.0), gd),
    ("agd", lambda: least_squares_problem(8, 4, kappa=10.0), agd),
    ("svrg", lambda: least_squares_problem(8, 4, kappa=10.0), svrg),
    ("sgd", lambda: median_problem(8), subgradient_sgd),
    ("cyclic_prox", lambda: median_problem(8), cyclic_prox),
]


@pytest.mark.parametrize("name, make, solver", SOLVER_CASES, ids=[c[0] for c in SOLVER_CASES])
@pytest.mark.parametrize("budget", [1, 7, 8, 9, 100])
def test_budget_respected(name, make, solver, budget):
    p = make()
    led = QueryLedger(p.m)
    solver(p, SolverConfig(budget=budget), ledger=led)
    assert led.total <= budget


@pytest.mark.parametrize("name, make, solver", SOLVER_CASES, ids=[c[0] for c in SOLVER_CASES])
def test_iterates_stay_in_domain(name, make, solver):
    p = make()
    B = p.fclass.radius_B
    tr = solver(p, SolverConfig(budget=200, cadence=1), x0=np.full(p.dim, 10.0))
    if B is not None:
        assert all(np.linalg.norm(x) <= B * (1 + 1e-12) for x in tr.iterates)


@pytest.mark.parametrize("name, make, solver", SOLVER_CASES, ids=[c[0] for c in SOLVER_CASES])
def test_runs_are_reproducible(name, make, solver):
    cfg = SolverConfig(budget=300, seed=9, cadence=5)
    assert solver(make(), cfg).to_bytes() == solver(make(), cfg).to_bytes()
