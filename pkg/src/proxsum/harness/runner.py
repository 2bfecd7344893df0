"""Execution of experiment configurations.

A configuration expands into one task per ``(m, kappa, seed)``. Solvers
whose iterates do not depend on ``eps`` run once to the smallest target and
the first-hit query counts for every ``eps`` are read from the trace; the
adversarial families and the smoothing-based solvers run once per ``eps``.
"""
from concurrent.futures import ProcessPoolExecutor
import csv
import os

import numpy as np

from .. import algorithms as alg
from ..adversary_det import floor_violations, new_adversary
from ..adversary_rand import sample_instance
from ..instances import FAMILIES as SYNTHETIC
from ..oracle import QueryLedger, evaluate_sum
from .fit import AXES, group_fits
from .report import RunResult, write_csv, write_svg

EPS_DEPENDENT_SOLVERS = ("smoothed_agd", "smoothed_catalyst")


class BudgetExhausted(RuntimeError):
    """Raised in strict mode when a run misses a target within its budget."""


def output_dir(cfg):
    return os.environ.get("PROXSUM_OUTPUT_DIR") or cfg.out_dir


def worker_count(default=1):
    raw = os.environ.get("PROXSUM_WORKERS")
    if not raw:
        return default
    n = int(raw)
    if n < 1:
        raise ValueError("PROXSUM_WORKERS must be a positive integer")
    return n


def solver_seed(seed, m):
    """64-bit solver seed derived from the run seed and ``m``."""
    return int(np.random.SeedSequence([int(seed), int(m)]).generate_state(1, np.uint64)[0])


def build_problem(cfg, m, eps, seed, kappa=None):
    """``(problem, adversary)``; ``adversary`` is None except for ``det_adversary``."""
    f = cfg.family
    B = cfg.B
    if f == "median":
        return SYNTHETIC[f](m, B=B if B is not None else 3.0, lam=cfg.lam), None
    if f == "least_squares":
        return SYNTHETIC[f](m, cfg.d or 50, kappa=kappa or 100.0, seed=seed), None
    if f in ("smooth_chain", "spectral_quadratic"):
        kw = {} if cfg.d is None else {"d": cfg.d}
        return SYNTHETIC[f](m, gamma=cfg.gamma, seed=seed, **kw), None
    if f == "det_adversary":
        adv = new_adversary(cfg.variant, m, eps, L=cfg.L, B=B if B is not None else 1.0,
                            gamma=cfg.gamma, lam=cfg.lam, eps0=cfg.eps0, dim=cfg.d, seed=seed)
        return adv.problem(), adv
    if f == "rand_instance":
        inst = sample_instance(cfg.variant, m, eps, L=cfg.L, B=B if B is not None else 1.0,
                               gamma=cfg.gamma, lam=cfg.lam, eps0=cfg.eps0, d=cfg.d, seed=seed)
        return inst.problem, None
    raise ValueError(f"unknown family {f!r}")


def run_solver(name, problem, eps, scfg, ledger, cfg=None):
    """Dispatch a solver by name; returns its :class:`~proxsum.trace.RunTrace`."""
    fc = problem.fclass
    if name == "gd":
        fn = alg.gd if fc.smooth_gamma is not None else alg.subgradient_descent
        return fn(problem, scfg, ledger=ledger)
    if name == "agd":
        if fc.smooth_gamma is not None:
            return alg.agd(problem, scfg, ledger=ledger)
        return alg.smoothed_minimize(problem, eps, "deterministic_agd", scfg, ledger=ledger)
    if name in ("subgradient_descent", "cyclic_prox", "svrg"):
        return alg.SOLVERS[name](problem, scfg, ledger=ledger)
    if name == "sgd":
        return alg.subgradient_sgd(problem, scfg, ledger=ledger)
    if name == "catalyst_svrg":
        inner = alg.SVRGHandle(seed=scfg.seed, step_scale=scfg.inner_step_scale,
                               epoch_length=scfg.epoch_length or 2 * problem.m,
                               epochs=scfg.inner_epochs or 1)
        return alg.catalyst_accelerate(inner, problem, scfg, ledger=ledger)
    if name == "smoothed_agd":
        return alg.smoothed_minimize(problem, eps, "deterministic_agd", scfg, ledger=ledger)
    if name == "smoothed_catalyst":
        return alg.smoothed_minimize(problem, eps, "randomized_accel", scfg, ledger=ledger)
    raise ValueError(f"unknown solver {name!r}")


def first_hit(queries, subopt, eps):
    for q, s in zip(queries, subopt):
        if s is not None and s <= eps:
            return int(q)
    return None


def write_trace(path, ledger, checkpoints, seed):
    """One row per query: ``query_index, component, cumulative_queries, suboptimality, seed``.

    ``suboptimality`` is filled on rows where a measurement was taken.
    """
    measured = dict(checkpoints)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("query_index", "component", "cumulative_queries", "suboptimality", "seed"))
        for rec in ledger.records:
            qi, comp = rec[0], rec[1]
            s = measured.get(qi + 1)
            w.writerow((qi, comp, qi + 1, "" if s is None else repr(float(s)), seed))
    return path


def _trace_name(cfg, m, kappa, seed, eps=None):
    parts = [cfg.name, f"m{m}"]
    if kappa is not None:
        parts.append(f"kappa{kappa!r}")
    if eps is not None:
        parts.append(f"eps{eps!r}")
    parts.append(f"seed{seed}")
    return "_".join(parts) + ".csv"


def _single_run(cfg, m, kappa, seed, eps, target, trace_dir):
    """Run once; returns ``(queries, subopt, floor_violations, trace_path)``."""
    problem, adv = build_problem(cfg, m, eps, seed, kappa)
    adversarial = adv is not None
    ledger = QueryLedger(m, keep_points=adversarial, keep_responses=False)
    scfg = cfg.solver_config(solver_seed(seed, m), target=None if adversarial else target)
    trace = run_solver(cfg.solver, problem, eps, scfg, ledger, cfg)
    n_viol = 0
    subopt = list(trace.subopt)
    if adversarial:
        points = [r[3] for r in ledger.records]
        rounds = list(adv.query_rounds)
        final = adv.finalize()
        n_viol = len(floor_violations(adv, final, points, rounds))
        f_star = final.optimum[1]
        subopt = [evaluate_sum(final, x) - f_star for x in trace.iterates]
    path = ""
    if trace_dir is not None:
        path = os.path.join(trace_dir, _trace_name(cfg, m, kappa, seed,
                                                   eps if adversarial or cfg.solver in
                                                   EPS_DEPENDENT_SOLVERS else None))
        write_trace(path, ledger, zip(trace.queries, subopt), seed)
    return list(trace.queries), subopt, n_viol, path


def run_task(task):
    """Results of one ``(m, kappa, seed)`` cell over the whole ``eps`` grid."""
    cfg, m, kappa, seed, trace_dir = task
    kval = None
    if cfg.family == "least_squares":
        kval = float(kappa) if kappa is not None else 100.0
    per_eps = cfg.family in ("det_adversary", "rand_instance") or cfg.solver in EPS_DEPENDENT_SOLVERS
    out = []
    if per_eps:
        for eps in cfg.eps:
            qs, subs, viol, path = _single_run(cfg, m, kval, seed, eps, eps, trace_dir)
            out.append(RunResult(cfg.family, cfg.variant, m, float(eps), seed,
                                 first_hit(qs, subs, eps), kval, viol,
                                 os.path.basename(path)))
    else:
        qs, subs, viol, path = _single_run(cfg, m, kval, seed, cfg.eps[0], min(cfg.eps),
                                           trace_dir)
        for eps in cfg.eps:
            out.append(RunResult(cfg.family, cfg.variant, m, float(eps), seed,
                                 first_hit(qs, subs, eps), kval, viol,
                                 os.path.basename(path)))
    return out


def run_experiment(cfg, out_dir=None, workers=None, write=True):
    """Run every task of ``cfg``; returns ``(results, fits, written_paths)``.

    Fits are ``(axis, group_label, RateFit)`` for every axis with at least
    three grid points. Raises :class:`BudgetExhausted` in strict mode when
    any run missed its target.
    """
    out_dir = out_dir or output_dir(cfg)
    workers = workers if workers is not None else worker_count()
    trace_dir = None
    if write:
        os.makedirs(out_dir, exist_ok=True)
        if cfg.traces:
            trace_dir = os.path.join(out_dir, "traces")
            os.makedirs(trace_dir, exist_ok=True)
    kappas = cfg.kappa or [None]
    tasks = [(cfg, m, k, s, trace_dir) for m in cfg.m for k in kappas for s in cfg.seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(run_task, tasks))
    else:
        chunks = [run_task(t) for t in tasks]
    results = [r for c in chunks for r in c]
    fits = [(axis, label, f) for axis in AXES for label, f in group_fits(results, axis)]
    paths = []
    if write:
        paths.append(write_csv(results, os.path.join(out_dir, cfg.name + ".csv"), fits))
        if cfg.svg and fits:
            axis, label, f = fits[0]
            sub = [r for r in results if _in_group(r, axis, label)]
            paths.append(write_svg(sub, os.path.join(out_dir, cfg.name + ".svg"), axis, f,
                                   cfg.name))
    if cfg.strict and any(r.queries is None for r in results):
        missed = sum(r.queries is None for r in results)
        raise BudgetExhausted(f"{missed} run(s) exhausted the budget before reaching eps")
    return results, fits, paths


def _in_group(result, axis, label):
    own = {"inv_eps": "eps"}.get(axis, axis)
    want = dict(item.split("=", 1) for item in label.split()) if label else {}
    for name in ("eps", "m", "kappa"):
        if name == own or name not in want:
            continue
        if repr(getattr(result, name)) != want[name]:
            return False
    return True
