import math
import os

import numpy as np
import pytest

from proxsum.algorithms import SolverConfig
from proxsum.harness import cli
from proxsum.harness.config import ConfigError, load_config, parse_config
from proxsum.harness.fit import fit_points, fit_rate, group_fits
from proxsum.harness.report import (RunResult, csv_text, emit_report, parse_csv, read_csv,
                                    svg_text)
from proxsum.harness.runner import (build_problem, output_dir, run_experiment, run_solver,
                                    solver_seed, worker_count)
from proxsum.harness.verify import SUITES, verify_suite
from proxsum.instances import median_problem
from proxsum.oracle import QueryLedger

MINIMAL = """
[problem]
family = median
m = 4
eps = 0.02, 0.01, 0.005

[solver]
name = smoothed_agd

[measure]
budget = 100000
"""


def _cfg(text=MINIMAL, **overrides):
    cfg = parse_config(text)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


# configuration ------------------------------------------------------------------------------
def test_minimal_config_fills_defaults():
    cfg = _cfg()
    assert cfg.family == "median" and cfg.m == [4] and cfg.eps == [0.02, 0.01, 0.005]
    assert cfg.seeds == [0] and cfg.strict is False and cfg.cadence is None
    assert cfg.inner_step_scale == 0.3 and cfg.name == "experiment"


def test_config_rejects_increasing_grid():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("0.02, 0.01, 0.005", "0.1, 0.2"))
    assert any("grid not decreasing" in e for e in exc.value.errors)


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL + "momentum_hack = 3\n")
    assert any("momentum_hack" in e for e in exc.value.errors)


def test_config_lists_every_error():
    text = """
[problem]
family = spaceship
eps = 0.1, 0.2
[solver]
name = magic
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    errs = " | ".join(exc.value.errors)
    for needle in ("spaceship", "magic", "not decreasing", "'m'", "'budget'"):
        assert needle in errs


def test_config_parse_error_has_line_info(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("[problem\nfamily = median\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "line: 1" in exc.value.errors[0]


def test_adversary_family_needs_variant():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.replace("family = median", "family = det_adversary"))


# rate fits --------------------------------------------------------------------------------------
EPS_GRID = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002]


def _synthetic(qfun, seeds=(0,), noise=None, rng=None):
    out = []
    for s in seeds:
        for e in EPS_GRID:
            q = qfun(e)
            if noise is not None:
                q *= math.exp(noise * rng.standard_normal())
            out.append(RunResult("median", "", 4, e, s, int(round(q))))
    return out


def test_fit_exact_inverse_eps():
    f = fit_points([1 / e for e in EPS_GRID], [1000 / e for e in EPS_GRID])
    assert f.slope == pytest.approx(1.0, abs=1e-9) and f.r_squared == pytest.approx(1.0)


def test_fit_inverse_sqrt_eps():
    f = fit_points([1 / e for e in EPS_GRID], [1000 / math.sqrt(e) for e in EPS_GRID])
    assert f.slope == pytest.approx(0.5, abs=1e-9)


def test_fit_noise_calibration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        res = _synthetic(lambda e: 1000 / e, seeds=range(5), noise=0.05, rng=rng)
        assert abs(fit_rate(res, "inv_eps").slope - 1.0) <= 0.03


def test_fit_needs_three_points():
    res = _synthetic(lambda e: 100 / e)[:2]
    with pytest.raises(ValueError):
        fit_rate(res, "inv_eps")


def test_fit_ignores_exhausted_runs_and_groups_by_m():
    res = _synthetic(lambda e: 100 / e) + [RunResult("median", "", 4, 0.001, 0, None)]
    res += [RunResult("median", "", 8, e, 0, int(200 / e)) for e in EPS_GRID]
    fits = group_fits(res, "inv_eps")
    assert [label for label, _ in fits] == ["m=4", "m=8"]
    assert all(f.n_points == len(EPS_GRID) for _, f in fits)
    with pytest.raises(ValueError):
        fit_rate(res, "inv_eps")


def test_fit_r_squared_in_unit_interval():
    res = _synthetic(lambda e: 50 + 7 * (1 / e) ** 0.3)
    f = fit_rate(res, "inv_eps")
    assert 0.0 <= f.r_squared <= 1.0


# reports ---------------------------------------------------------------------------------------
def _two_point_results():
    return [RunResult("median", "", 4, 0.02, 0, 120, None, 0, "t0.csv"),
            RunResult("median", "", 4, 0.01, 0, None, None, 0, "t1.csv")]


def test_csv_two_points_have_two_rows_and_footer():
    lines = csv_text(_two_point_results()).splitlines()
    assert lines[0].startswith("family,variant,m,eps,seed,queries")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    assert len(body) == 2 and "budget_exhausted" in body[1]
    assert lines[-1].startswith("#")


def test_csv_round_trip_exact():
    res = _synthetic(lambda e: 1000 / e, seeds=(0, 1))
    res.append(RunResult("least_squares", "", 64, 1e-3, 2, None, 100.0, 3, "x.csv"))
    back, footer = parse_csv(csv_text(res))
    assert back == res and footer


def test_csv_rejects_foreign_file():
    with pytest.raises(ValueError):
        parse_csv("a,b\n1,2\n")


def test_svg_byte_stable():
    res = _synthetic(lambda e: 1000 / e)
    f = fit_rate(res, "inv_eps")
    a = svg_text(res, "inv_eps", f, "demo")
    assert a == svg_text(res, "inv_eps", f, "demo")
    assert a.startswith("<svg") and "slope 1.000" in a and "http" in a.splitlines()[0]


def test_empty_results_create_no_file(tmp_path):
    out = tmp_path / "out"
    for fmt in ("csv", "svg"):
        with pytest.raises(ValueError):
            emit_report([], out, "empty", fmt)
    assert not out.exists()


def test_emit_report_writes_both_formats(tmp_path):
    res = _synthetic(lambda e: 1000 / e)
    p1 = emit_report(res, tmp_path, "r", "csv")
    p2 = emit_report(res, tmp_path, "r", "svg", fit=fit_rate(res, "inv_eps"))
    assert read_csv(p1)[0] == res and os.path.getsize(p2) > 0


# runner -----------------------------------------------------------------------------------------
def test_environment_overrides(monkeypatch):
    cfg = _cfg()
    monkeypatch.setenv("PROXSUM_OUTPUT_DIR", "/tmp/elsewhere")
    assert output_dir(cfg) == "/tmp/elsewhere"
    monkeypatch.delenv("PROXSUM_OUTPUT_DIR")
    assert output_dir(cfg) == "results"
    monkeypatch.setenv("PROXSUM_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("PROXSUM_WORKERS", "0")
    with pytest.raises(ValueError):
        worker_count()


def test_solver_seed_is_64_bit_and_distinct():
    seeds = {solver_seed(s, m) for s in range(5) for m in (4, 8)}
    assert len(seeds) == 10 and all(0 <= s < 2**64 for s in seeds)


def test_identical_runs_give_identical_bytes(tmp_path):
    cfg = _cfg(cadence=1, name="det")
    _, _, pa = run_experiment(cfg, out_dir=str(tmp_path / "a"), workers=1)
    _, _, pb = run_experiment(cfg, out_dir=str(tmp_path / "b"), workers=1)
    for a, b in zip(pa, pb):
        assert open(a, "rb").read() == open(b, "rb").read()
    ta = sorted(os.listdir(tmp_path / "a" / "traces"))
    assert ta == sorted(os.listdir(tmp_path / "b" / "traces"))
    for name in ta:
        assert (open(tmp_path / "a" / "traces" / name, "rb").read()
                == open(tmp_path / "b" / "traces" / name, "rb").read())


def test_trace_rows_cover_every_query(tmp_path):
    cfg = _cfg(cadence=1, name="tr", eps=[0.02])
    results, _, _ = run_experiment(cfg, out_dir=str(tmp_path), workers=1)
    rows = open(tmp_path / "traces" / results[0].trace).read().splitlines()
    assert rows[0] == "query_index,component,cumulative_queries,suboptimality,seed"
    assert len(rows) - 1 >= results[0].queries
    assert rows[1].split(",")[:3] == ["0", "0", "1"]


def test_smoothed_agd_median_within_budget_constant(tmp_path):
    cfg = _cfg(eps=[0.01], cadence=1)
    results, _, _ = run_experiment(cfg, out_dir=str(tmp_path), workers=1, write=False)
    m, L, B = 4, 1.0, 3.0
    q = results[0].queries
    assert q is not None and q <= 50 * m * L * B / 0.01


def test_queries_nonincreasing_in_eps(tmp_path):
    cfg = _cfg(cadence=1, seeds=[0, 1])
    results, _, _ = run_experiment(cfg, out_dir=str(tmp_path), workers=1, write=False)
    for s in (0, 1):
        qs = [r.queries for r in results if r.seed == s]
        assert all(a <= b for a, b in zip(qs, qs[1:]))


ADV = """
[problem]
family = det_adversary
variant = lipschitz
m = 8
eps = 0.0155
seeds = 0
[solver]
name = gd
[measure]
budget = {budget}
cadence = 1
strict = {strict}
"""


def test_gd_against_adversary_exhausts_small_budget(tmp_path):
    cfg = parse_config(ADV.format(budget=19, strict="false"))
    results, _, _ = run_experiment(cfg, out_dir=str(tmp_path), workers=1, write=False)
    r = results[0]
    assert r.queries is None and r.floor_violations == 0


def test_adversarial_runs_keep_the_floor(tmp_path):
    cfg = parse_config(ADV.format(budget=400, strict="false"))
    results, _, _ = run_experiment(cfg, out_dir=str(tmp_path), workers=1, write=False)
    assert results[0].floor_violations == 0


def test_budget_accounting_matches_ledger():
    p = median_problem(4)
    led = QueryLedger(4, keep_points=False)
    tr = run_solver("smoothed_agd", p, 0.01, SolverConfig(budget=10**5, target=0.01, cadence=1),
                    led)
    assert tr.queries_to_target == led.total == tr.queries[-1]
    led = QueryLedger(4, keep_points=False)
    tr = run_solver("gd", p, 0.01, SolverConfig(budget=37, cadence=1), led)
    assert tr.queries[-1] == led.total <= 37


def test_build_problem_families():
    cfg = _cfg()
    for fam in ("median", "least_squares", "smooth_chain", "spectral_quadratic"):
        cfg.family = fam
        p, adv = build_problem(cfg, 4, 0.01, 0, kappa=10.0)
        assert adv is None and p.m == 4 and p.optimum is not None


# verification suites ---------------------------------------------------------------------------
@pytest.mark.parametrize("name", ["moreau", "prox_oracles", "det_replay"])
def test_suites_pass_and_negative_controls_fail(name):
    assert verify_suite(name).ok
    bad = verify_suite(name, inject_fault=True)
    assert not bad.ok and bad.violations


def test_rand_structure_suite_small():
    kw = dict(span_probes=200, prox_checks=20, floor_probes=50)
    rep = verify_suite("rand_structure", **kw)
    assert rep.ok, rep.to_text()
    assert not verify_suite("rand_structure", inject_fault=True, **kw).ok


def test_suite_report_lists_measured_and_tolerance():
    lines = verify_suite("moreau").to_text().splitlines()
    assert "0 violations" in lines[0]
    assert all("measured" in ln and "tol" in ln for ln in lines[1:])


def test_unknown_suite():
    assert "moreau" in SUITES
    with pytest.raises(ValueError):
        verify_suite("nonsense")


# command line ------------------------------------------------------------------------------------
def test_cli_run_and_fit(tmp_path, capsys):
    cfg = tmp_path / "med.ini"
    cfg.write_text(MINIMAL + "cadence = 1\n[output]\nname = med\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    csv_path = tmp_path / "o" / "med.csv"
    assert csv_path.exists() and (tmp_path / "o" / "med.svg").exists()
    assert cli.main(["fit", str(csv_path), "--axis", "inv_eps"]) == 0
    assert "slope=" in capsys.readouterr().out
    assert cli.main(["fit", str(csv_path), "--axis", "m"]) == 1


def test_cli_usage_and_config_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.ini"
    bad.write_text(MINIMAL.replace("median", "spaceship"))
    assert cli.main(["run", str(bad)]) == 1
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 1


def test_cli_verify_exit_codes():
    assert cli.main(["verify", "moreau"]) == 0
    assert cli.main(["verify", "moreau", "--negative-control"]) == 2


def test_cli_strict_budget_exit(tmp_path):
    cfg = tmp_path / "adv.ini"
    cfg.write_text(ADV.format(budget=19, strict="true"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cli_demo_lower_bound(capsys):
    assert cli.main(["demo-lower-bound", "--variant", "lipschitz", "--m", "4",
                     "--eps", "0.025"]) == 0
    out = capsys.readouterr().out
    assert out.count("certified") >= 3 and "VIOLATED" not in out
