import math

import numpy as np
import pytest

from proxsum.adversary_det import (DetAdversary, DimensionExhausted, floor_violations,
                                   new_adversary, replay_verify)
from proxsum.algorithms import SolverConfig, agd, gd
from proxsum.harness.verify import play_det_game
from proxsum.oracle import QueryLedger, check_prox_optimality, evaluate_sum, query

SMOOTH_EPS = 1.0 / (32 * 6.5 ** 2)  # k = 6


# parameters ------------------------------------------------------------------------
def test_lipschitz_parameters():
    adv = new_adversary("lipschitz", 8, 1.0 / 24)
    assert adv.k == 2
    assert adv.b == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-15)


def test_smooth_parameters():
    adv = new_adversary("smooth", 4, 1.0 / 512)
    assert adv.k == 4
    assert adv.a == pytest.approx(math.sqrt(3.0 / 5.0), rel=1e-15)


def test_smooth_sc_condition_number():
    adv = new_adversary("smooth_sc", 2, 1e-6, lam=0.01)
    assert adv.Q == pytest.approx(50.5, rel=1e-14)
    assert adv.q == pytest.approx((math.sqrt(50.5) - 1) / (math.sqrt(50.5) + 1), rel=1e-14)


@pytest.mark.parametrize("kwargs", [
    dict(variant="bogus", m=4, eps=0.01),
    dict(variant="lipschitz", m=1, eps=0.01),
    dict(variant="lipschitz", m=4, eps=-1.0),
    dict(variant="smooth_sc", m=4, eps=0.01),
])
def test_invalid_parameters(kwargs):
    with pytest.raises(ValueError):
        DetAdversary(**kwargs)


def test_degenerate_eps_warns():
    with pytest.warns(UserWarning):
        new_adversary("lipschitz", 4, 0.5)


# game mechanics ----------------------------------------------------------------------
def test_first_query_at_origin():
    adv = new_adversary("lipschitz", 8, 1.0 / 24)
    prob = adv.problem()
    r = query(prob, np.zeros(adv.dim), 0, 1.0, QueryLedger(8))
    assert r.value == pytest.approx(adv.b / math.sqrt(2.0), rel=1e-14)
    np.testing.assert_allclose(r.gradient, -adv.basis[0] / math.sqrt(2.0), atol=1e-15)


def test_round_closes_after_half_the_components():
    adv = new_adversary("lipschitz", 4, 0.025)
    prob = adv.problem()
    led = QueryLedger(4)
    x = np.zeros(adv.dim)
    query(prob, x, 0, 1.0, led)
    query(prob, x, 0, 1.0, led)
    assert adv.round == 1
    query(prob, x, 1, 1.0, led)
    assert adv.round == 2
    np.testing.assert_array_equal(adv.delta[:, 1], [0, 0, 1, 1])
    assert adv.query_rounds == [1, 1, 1]


def test_delta_rows_hold_half_after_every_round():
    m = 6
    adv = new_adversary("lipschitz", m, 0.0155)
    prob = adv.problem()
    led = QueryLedger(m)
    rng = np.random.default_rng(0)
    for _ in range(adv.k * adv.need):
        query(prob, rng.standard_normal(adv.dim) * 0.01, int(rng.integers(m)), 1.0, led)
    fin = adv.finalize()
    assert fin.meta["k"] == adv.k
    np.testing.assert_array_equal(adv.delta[:, 1:].sum(axis=0), np.full(adv.k, m // 2))


def test_directions_orthonormal_and_orthogonal_to_earlier_queries():
    adv = new_adversary("smooth", 4, SMOOTH_EPS)
    prob = adv.problem()
    led = QueryLedger(4)
    rng = np.random.default_rng(1)
    pts = []
    for _ in range(3 * adv.need):
        x = rng.standard_normal(adv.dim)
        pts.append((x, adv.round))
        query(prob, x, int(rng.integers(4)), 1.0, led)
    adv.finalize()
    G = adv.basis @ adv.basis.T
    np.testing.assert_allclose(G, np.eye(adv.k + 1), atol=1e-12)
    for x, t in pts:
        # v_r for r >= t is drawn after x was queried
        assert np.abs(adv.basis[t:] @ x).max() <= 1e-10 * np.linalg.norm(x)


def test_smooth_prox_residual():
    adv = new_adversary("smooth", 4, SMOOTH_EPS)
    fin = adv.finalize()
    rng = np.random.default_rng(2)
    for i in range(4):
        comp = fin.components[i]
        for _ in range(10):
            x = rng.standard_normal(adv.dim) * 0.1
            beta = 10.0 ** rng.uniform(-1, 2)
            assert check_prox_optimality(comp, x, beta, comp.prox(x, beta)) <= 1e-9


def test_dimension_exhaustion_is_reported():
    adv = new_adversary("lipschitz", 2, 1.0 / 24, dim=3)
    prob = adv.problem()
    led = QueryLedger(2)
    rng = np.random.default_rng(3)
    query(prob, rng.standard_normal(3) * 0.1, 0, 1.0, led)
    with pytest.raises(DimensionExhausted):
        query(prob, rng.standard_normal(3) * 0.1, 1, 1.0, led)


# floors and finalized optima ------------------------------------------------------------
def test_lipschitz_floor_value():
    adv = new_adversary("lipschitz", 8, 1.0 / 24)
    assert adv.floor_for_round(1) == pytest.approx(1.0 / (6.0 * math.sqrt(6.0)), rel=1e-14)
    assert adv.floor_for_round(adv.k + 1) == 0.0


def test_smooth_floor_value():
    adv = new_adversary("smooth", 4, 1.0 / 512)
    assert adv.floor_for_round(1) == pytest.approx(1.0 / 512, rel=1e-14)
    assert adv.floor_for_round(adv.k // 2 + 1) == 0.0


def test_lipschitz_finalized_optimum():
    adv = new_adversary("lipschitz", 8, 1.0 / 24)
    fin = adv.finalize()
    xs, fs = fin.optimum
    assert fs == 0.0
    assert np.linalg.norm(xs) == pytest.approx(1.0, rel=1e-12)
    assert evaluate_sum(fin, xs) == pytest.approx(0.0, abs=1e-14)


def test_smooth_finalized_optimum():
    m = 4
    adv = new_adversary("smooth", m, SMOOTH_EPS)
    fin = adv.finalize()
    xs, fs = fin.optimum
    k, a = adv.k, adv.a
    expected = -a * a * (m // 2) / (8.0 * m) * (1.0 - 1.0 / (k + 2))
    assert fs == pytest.approx(expected, rel=1e-13)
    assert evaluate_sum(fin, xs) == pytest.approx(fs, abs=1e-14)


def test_smooth_sc_initial_gap():
    adv = new_adversary("smooth_sc", 4, 1e-4, lam=0.01)
    fin = adv.finalize()
    assert fin.eps0 == pytest.approx(adv.eps0, rel=1e-10)
    xs, fs = fin.optimum
    assert evaluate_sum(fin, xs) == pytest.approx(fs, rel=1e-10)


@pytest.mark.parametrize("variant, eps, params", [
    ("lipschitz", 0.025, {}),
    ("lipschitz_sc", 0.0125, {"lam": 0.1}),
    ("smooth", SMOOTH_EPS, {}),
    ("smooth_sc", 1e-4, {"lam": 0.01}),
])
def test_optimum_not_beaten_nearby(variant, eps, params):
    fin = new_adversary(variant, 4, eps, **params).finalize()
    xs, fs = fin.optimum
    rng = np.random.default_rng(4)
    B = fin.fclass.radius_B
    for _ in range(200):
        y = xs + rng.standard_normal(xs.size) * 10.0 ** rng.uniform(-4, -1)
        if B is not None and np.linalg.norm(y) > B:
            y *= B / np.linalg.norm(y)
        assert evaluate_sum(fin, y) >= fs - 1e-12


# class certificates ---------------------------------------------------------------------
def test_lipschitz_components_have_bounded_subgradients():
    adv = new_adversary("lipschitz", 4, 0.025)
    fin = adv.finalize()
    # anchor term plus a chain whose coefficient vector has norm at most sqrt(1 - 1/(2k));
    # consecutive active links can push a component above L itself
    bound = 1.0 / math.sqrt(2.0) + math.sqrt(1.0 - 1.0 / (2 * adv.k))
    rng = np.random.default_rng(5)
    for comp in fin.components:
        for _ in range(100):
            x = rng.standard_normal(fin.dim) * 0.05
            assert np.linalg.norm(comp.subgradient(x)) <= bound + 1e-12


def test_smooth_components_are_gamma_smooth():
    fin = new_adversary("smooth", 4, SMOOTH_EPS).finalize()
    rng = np.random.default_rng(6)
    for comp in fin.components:
        for _ in range(100):
            x, y = rng.standard_normal((2, fin.dim)) * 0.05
            lhs = np.linalg.norm(comp.subgradient(x) - comp.subgradient(y))
            assert lhs <= np.linalg.norm(x - y) * (1 + 1e-10)


# replay audit -----------------------------------------------------------------------------
def _logged_game(variant, solver, m=4, eps=None):
    eps = eps or (0.025 if variant == "lipschitz" else SMOOTH_EPS)
    adv = new_adversary(variant, m, eps)
    led = QueryLedger(m, keep_responses=True)
    solver(adv.problem(), SolverConfig(budget=adv.k * adv.need + 3 * m), ledger=led)
    return adv, led


@pytest.mark.parametrize("solver", [gd, agd], ids=["gd", "agd"])
def test_replay_of_smooth_game_is_clean(solver):
    adv, led = _logged_game("smooth", solver)
    rounds = list(adv.query_rounds)
    fin = adv.finalize()
    rep = replay_verify(fin, led, probes=200)
    assert rep.ok and rep.checked == led.total
    pts = [r[3] for r in led.records]
    assert floor_violations(adv, fin, pts, rounds) == []


def test_tampered_answer_is_caught_once():
    adv, led = _logged_game("smooth", gd)
    fin = adv.finalize()
    qi, i, beta, x, resp = led.records[3]
    led.records[3] = (qi, i, beta, x, type(resp)(resp.value + 1e-3, resp.gradient,
                                                  resp.prox_point))
    rep = replay_verify(fin, led, probes=200)
    assert len(rep.violations) == 1 and rep.violations[0][:2] == (3, "value")


def test_replay_needs_stored_responses():
    adv = new_adversary("lipschitz", 4, 0.025)
    led = QueryLedger(4)
    query(adv.problem(), np.zeros(adv.dim), 0, 1.0, led)
    with pytest.raises(ValueError):
        replay_verify(adv.finalize(), led)


@pytest.mark.parametrize("variant, solver", [
    ("lipschitz", "gd"), ("lipschitz", "smoothed_agd"), ("lipschitz", "cyclic_prox"),
    ("smooth", "gd"), ("smooth", "agd"), ("smooth", "cyclic_prox"),
])
def test_games_keep_the_floor(variant, solver):
    eps = 0.025 if variant == "lipschitz" else SMOOTH_EPS
    g = play_det_game(variant, 4, eps, solver, probes=100)
    assert g.ok, g
    assert g.min_subopt >= g.floor


def test_corrupted_prox_fails_the_game_audit():
    g = play_det_game("lipschitz", 4, 0.025, "cyclic_prox", probes=50, corrupt=True)
    assert g.replay_violations == 1 and not g.ok
