"""Command-line entry point ``proxsum``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 budget exhausted in strict mode.
"""
import argparse
import sys
import warnings

from .config import ConfigError, load_config
from .fit import AXES, group_fits
from .report import read_csv
from .runner import BudgetExhausted, run_experiment
from .verify import GAME_SOLVERS, SUITES, play_det_game, verify_suite

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="proxsum", description="Finite-sum oracle complexity experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="parallel runs (default PROXSUM_WORKERS or 1)")

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--negative-control", action="store_true",
                   help="inject a wrong prox; the suite must then fail")

    f = sub.add_parser("fit", help="fit rate exponents from a results CSV")
    f.add_argument("results")
    f.add_argument("--axis", choices=AXES, required=True)

    d = sub.add_parser("demo-lower-bound",
                       help="play deterministic solvers against the resisting oracle")
    d.add_argument("--variant", choices=tuple(GAME_SOLVERS), required=True)
    d.add_argument("--m", type=int, required=True)
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--lam", type=float, default=0.0)
    d.add_argument("--seed", type=int, default=0)
    return p


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: no such config file: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        results, fits, paths = run_experiment(cfg, out_dir=args.out, workers=args.workers)
    except BudgetExhausted as exc:
        print(f"strict mode: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    missed = sum(r.queries is None for r in results)
    print(f"{len(results)} results, {missed} budget exhausted")
    for axis, label, fit in fits:
        print(f"fit {axis} {label}: slope {fit.slope:.4f}  R2 {fit.r_squared:.4f}  "
              f"n {fit.n_points}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args):
    names = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in names:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = verify_suite(name, inject_fault=args.negative_control)
        print(rep.to_text())
        ok = ok and rep.ok
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_fit(args):
    try:
        results, _ = read_csv(args.results)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fits = group_fits(results, args.axis)
    if not fits:
        print("error: rate fit needs at least three grid points with finite queries",
              file=sys.stderr)
        return EXIT_USAGE
    for label, f in fits:
        print(f"axis={f.axis} {label} slope={f.slope:.6f} intercept={f.intercept:.6f} "
              f"r_squared={f.r_squared:.6f} n={f.n_points}")
    return EXIT_OK


def cmd_demo(args):
    params = {"lam": args.lam} if args.lam else {}
    try:
        games = [play_det_game(args.variant, args.m, args.eps, s, seed=args.seed, **params)
                 for s in GAME_SOLVERS[args.variant]]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    g0 = games[0]
    print(f"variant {g0.variant}  m {g0.m}  eps {g0.eps:g}  k {g0.k}  "
          f"certified queries {g0.certified_queries}  floor {g0.floor:.6e}")
    print(f"{'solver':<14}{'queries':>8}{'min subopt':>14}{'floor viol':>12}"
          f"{'replayed':>10}{'replay viol':>13}  status")
    for g in games:
        print(f"{g.solver:<14}{g.queries:>8}{g.min_subopt:>14.6e}{g.floor_violations:>12}"
              f"{g.replay_checked:>10}{g.replay_violations:>13}  "
              f"{'certified' if g.ok else 'VIOLATED'}")
    return EXIT_OK if all(g.ok for g in games) else EXIT_VERIFY


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "fit": cmd_fit,
            "demo-lower-bound": cmd_demo}


def main(argv=None):
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
