"""Time the compiled kernels against their pure-Python twins.

Run ``python3 benchmarks/bench_kernels.py [--repeat N]``. Prints one line per
kernel and size with the best-of-N time of each backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from proxsum import _pykernels

try:
    from proxsum import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    for n in (16, 256, 4096):
        y = rng.standard_normal(n)
        w = rng.uniform(0.0, 1.0, n - 1)
        yield "chain_tv_prox", n, "chain_tv_prox", (y, 0.5, 0.1, w, 2.0)
    for n in (16, 256, 4096):
        lower, upper = rng.uniform(-1, 0, n - 1), rng.uniform(-1, 0, n - 1)
        diag = 3.0 + rng.uniform(0, 1, n)
        yield "tridiag_solve", n, "tridiag_solve", (lower, diag, upper, rng.standard_normal(n))
    for d, count in ((64, 8), (1024, 32), (4096, 64)):
        q, _ = np.linalg.qr(rng.standard_normal((d, count)))
        basis = np.zeros((count + 1, d))
        basis[:count] = q.T
        yield "mgs_orthogonalize", d, "mgs_orthogonalize", (basis, count, rng.standard_normal(d))


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; timing the Python kernels only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'size':>6}{'python':>14}{'compiled':>14}{'speedup':>10}")
    for label, size, name, fargs in cases(rng):
        t_py = best_time(getattr(_pykernels, name), fargs, args.repeat)
        if _ckernels is None:
            print(f"{label:<20}{size:>6}{t_py * 1e6:>12.1f}us{'-':>14}{'-':>10}")
            continue
        t_c = best_time(getattr(_ckernels, name), fargs, args.repeat)
        print(f"{label:<20}{size:>6}{t_py * 1e6:>12.1f}us{t_c * 1e6:>12.1f}us{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
