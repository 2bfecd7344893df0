"""End-to-end acceptance checks, one test per criterion.

Each test prints ``ACCEPTANCE n: PASS|FAIL`` with the measured quantities and
then asserts the same condition, so a failing criterion also fails the run.
"""
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from proxsum.adversary_det import new_adversary
from proxsum.adversary_rand import sample_instance
from proxsum.algorithms import SolverConfig, svrg, svrg_certified_epoch_length
from proxsum.harness.config import parse_config
from proxsum.harness.fit import fit_points, fit_rate, group_fits, medians
from proxsum.harness.report import RunResult, csv_text, parse_csv
from proxsum.harness.runner import run_experiment
from proxsum.harness.verify import play_det_game, verify_suite
from proxsum.instances import least_squares_problem
from proxsum.oracle import QueryLedger, query
from proxsum.trace import as_view


def _report(n, ok, detail):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _config(family, solver, m, eps, seeds, budget, extra_problem="", extra_solver=""):
    return parse_config(f"""
[problem]
family = {family}
m = {", ".join(map(str, m))}
eps = {", ".join(map(repr, eps))}
seeds = {", ".join(map(str, seeds))}
{extra_problem}
[solver]
name = {solver}
{extra_solver}
[measure]
budget = {budget}
cadence = 1
""")


def test_acceptance_1_moreau_suite():
    t0 = time.perf_counter()
    rep = verify_suite("moreau")
    dt = time.perf_counter() - t0
    ok = rep.ok and dt < 5.0
    _report(1, ok, f"{len(rep.checks)} checks, {len(rep.violations)} violations, {dt:.1f}s")


def _det_games(variant, cases, solvers, expect_floor):
    t0 = time.perf_counter()
    worst_margin, problems, games = math.inf, [], 0
    for m, eps, k in cases:
        for solver in solvers:
            g = play_det_game(variant, m, eps, solver)
            games += 1
            if g.k != k:
                problems.append(f"m={m} eps={eps:g}: k={g.k}, expected {k}")
            if not math.isclose(g.floor, expect_floor(new_adversary(variant, m, eps), k),
                                rel_tol=1e-12):
                problems.append(f"m={m} k={k}: floor {g.floor:.6e}")
            if g.replay_violations or g.floor_violations:
                problems.append(f"m={m} k={k} {solver}: replay {g.replay_violations}, "
                                f"floor {g.floor_violations}")
            worst_margin = min(worst_margin, g.min_subopt - (g.floor - 1e-9))
    dt = time.perf_counter() - t0
    ok = not problems and worst_margin >= 0.0 and dt < 30.0
    detail = (f"{games} games, min(subopt - floor + 1e-9) = {worst_margin:.3e}, {dt:.1f}s"
              + ("; " + "; ".join(problems) if problems else ""))
    return ok, detail


def test_acceptance_2_deterministic_lipschitz_floor():
    cases = [(m, eps, k) for m in (4, 8) for eps, k in ((0.025, 3), (0.0155, 5))]
    ok, detail = _det_games("lipschitz", cases, ("gd", "smoothed_agd", "cyclic_prox"),
                            lambda adv, k: adv.b / (6.0 * math.sqrt(k)))
    _report(2, ok, detail)


def test_acceptance_3_deterministic_smooth_floor():
    cases = [(m, 1.0 / (32 * (k + 0.5) ** 2), k) for m in (4, 8) for k in (6, 10)]
    ok, detail = _det_games("smooth", cases, ("gd", "agd", "cyclic_prox"),
                            lambda adv, k: 1.0 / (32.0 * k * k))
    _report(3, ok, detail)


def test_acceptance_4_smoothed_agd_median():
    t0 = time.perf_counter()
    cfg = _config("median", "smoothed_agd", [4, 16], [0.02, 0.01, 0.005], [0], 10**6)
    results, _, _ = run_experiment(cfg, workers=1, write=False)
    L, B = 1.0, 3.0
    within = all(r.queries is not None and r.queries <= 50 * r.m * L * B / r.eps
                 for r in results)
    fits = group_fits(results, "inv_eps")
    slopes_ok = all(abs(f.slope - 1.0) <= 0.15 for _, f in fits)
    dt = time.perf_counter() - t0
    ratio = max(r.queries * r.eps / (r.m * L * B) for r in results if r.queries)
    slopes = ", ".join(f"{label} slope {f.slope:.3f}" for label, f in fits)
    ok = within and slopes_ok and dt < 120.0
    _report(4, ok, f"max queries/(mLB/eps) = {ratio:.2f} (limit 50); {slopes} "
                   f"(target 1.0 +- 0.15); {dt:.1f}s")


def test_acceptance_5_agd_smooth_rate():
    t0 = time.perf_counter()
    cfg = _config("spectral_quadratic", "agd", [8], [1e-3, 3e-4, 1e-4, 3e-5, 1e-5], [0], 10**6,
                  extra_problem="d = 200")
    results, _, _ = run_experiment(cfg, workers=1, write=False)
    f = fit_rate(results, "inv_eps")
    dt = time.perf_counter() - t0
    ok = abs(f.slope - 0.5) <= 0.1 and dt < 60.0
    _report(5, ok, f"slope {f.slope:.3f} (target 0.5 +- 0.1), R^2 {f.r_squared:.3f}, {dt:.1f}s")


def test_acceptance_6_randomized_separation():
    t0 = time.perf_counter()
    eps = 0.005
    seeds = list(range(5))
    cat_cfg = _config("median", "smoothed_catalyst", [16, 64, 256], [eps], seeds, 10**6,
                      extra_solver="inner_step_scale = 0.3")
    cat, _, _ = run_experiment(cat_cfg, workers=1, write=False)
    det_cfg = _config("median", "smoothed_agd", [64], [eps], seeds, 10**6)
    det, _, _ = run_experiment(det_cfg, workers=1, write=False)
    keys, meds = medians(cat, "m")
    med_cat = dict(zip(keys, meds))
    med_det = float(np.median([r.queries for r in det]))
    ms = sorted(med_cat)
    expo = fit_points(ms, [med_cat[m] for m in ms], "m").slope
    dt = time.perf_counter() - t0
    ok = med_cat[64] < med_det and expo <= 0.75 and dt < 300.0
    _report(6, ok, f"m=64 median queries: randomized {med_cat[64]:.0f} vs deterministic "
                   f"{med_det:.0f}; m-exponent {expo:.3f} (limit 0.75) over "
                   f"{ {m: round(med_cat[m]) for m in ms} }; {dt:.1f}s")


def test_acceptance_7_svrg_linear_rate():
    t0 = time.perf_counter()
    p = least_squares_problem(64, 50, kappa=100.0, seed=0)
    n = svrg_certified_epoch_length(as_view(p))
    r2s = []
    for seed in range(5):
        tr = svrg(p, SolverConfig(budget=10 * (64 + n), seed=seed, epoch_length=n,
                                  cadence=64 + n))
        q, s = np.array(tr.queries, float), np.array(tr.subopt, float)
        # below 1e-13 the suboptimality is rounding noise, not the contraction
        keep = s > 1e-13
        x, y = q[keep], np.log(s[keep])
        c = np.polyfit(x, y, 1)
        r2s.append(1.0 - np.sum((y - np.polyval(c, x)) ** 2) / np.sum((y - y.mean()) ** 2))
    dt = time.perf_counter() - t0
    ok = min(r2s) >= 0.98 and dt < 60.0
    _report(7, ok, f"epoch length {n}, semilog R^2 per seed {np.round(r2s, 4).tolist()} "
                   f"(limit 0.98), {dt:.1f}s")


def test_acceptance_8_randomized_structure_suite():
    t0 = time.perf_counter()
    rep = verify_suite("rand_structure")
    dt = time.perf_counter() - t0
    worst = {c.name.split(":")[-1].split("(")[0].strip(): c.slack for c in rep.checks}
    ok = rep.ok and dt < 60.0
    _report(8, ok, f"{len(rep.checks)} checks, {len(rep.violations)} violations, "
                   f"last-case slack {worst}, {dt:.1f}s")


def _sign_error_rate(eps, budget, trials, m=50_000):
    """Plug-in estimator: sample ``budget`` components, guess the majority sign."""
    errors = 0
    for s in range(trials):
        inst = sample_instance("bernoulli", m, eps, seed=s)
        truth = 1.0 if inst.params["p"] > 0.5 else -1.0
        rng = np.random.default_rng(100_000 + s)
        led = QueryLedger(m, keep_points=False)
        total = 0.0
        for i in rng.integers(m, size=budget):
            total += query(inst.problem, np.zeros(1), int(i), 1.0, led, want_prox=False).gradient[0]
        guess = math.copysign(1.0, total) if total != 0 else (1.0 if rng.random() < 0.5 else -1.0)
        errors += guess != truth
    return errors / trials


def _wilson(k, n, z=1.96):
    p = k / n
    mid = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return mid - half, mid + half


def test_acceptance_9_bernoulli_information_bound():
    t0 = time.perf_counter()
    eps, trials = 0.05, 400
    small = math.floor(1.0 / (128 * eps * eps) / 40)
    large = round(40 / (128 * eps * eps))
    e_small = _sign_error_rate(eps, small, trials)
    e_large = _sign_error_rate(eps, large, trials)
    lo_small, _ = _wilson(round(e_small * trials), trials)
    _, hi_large = _wilson(round(e_large * trials), trials)
    dt = time.perf_counter() - t0
    # the 95% band must sit on the right side of each threshold
    ok = lo_small >= 1.0 / 3.0 - 1e-12 and hi_large < 0.10 and dt < 30.0
    _report(9, ok, f"N={small}: error {e_small:.3f} (95% low {lo_small:.3f}, need >= 1/3); "
                   f"N={large}: error {e_large:.3f} (95% high {hi_large:.3f}, need < 0.10); "
                   f"{dt:.1f}s")


def test_acceptance_10_harness_self_tests(tmp_path):
    grid = [0.1, 0.05, 0.02, 0.01, 0.005]
    f1 = fit_points([1 / e for e in grid], [1000 / e for e in grid])
    f2 = fit_points([1 / e for e in grid], [1000 / math.sqrt(e) for e in grid])
    exact = abs(f1.slope - 1.0) <= 1e-9 and abs(f2.slope - 0.5) <= 1e-9
    res = [RunResult("median", "", 4, e, s, int(1000 / e)) for s in (0, 1) for e in grid]
    res.append(RunResult("least_squares", "", 8, 1e-4, 3, None, 12.5, 0, "t.csv"))
    round_trip = parse_csv(csv_text(res))[0] == res
    cfg = _config("median", "smoothed_agd", [4], [0.02, 0.01, 0.005], [0, 1], 10**5)
    _, _, pa = run_experiment(cfg, out_dir=str(tmp_path / "a"), workers=1)
    _, _, pb = run_experiment(cfg, out_dir=str(tmp_path / "b"), workers=1)
    identical = all(open(a, "rb").read() == open(b, "rb").read() for a, b in zip(pa, pb))
    ok = exact and round_trip and identical and len(pa) == 2
    _report(10, ok, f"fit slopes {f1.slope:.12f}/{f2.slope:.12f}, CSV round trip {round_trip}, "
                    f"byte-identical reruns {identical}")
