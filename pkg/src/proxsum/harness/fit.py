"""Power-law fits of query counts against ``1/eps``, ``m`` or ``kappa``."""
from dataclasses import dataclass

import numpy as np

AXES = ("inv_eps", "m", "kappa")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    axis: str
    n_points: int


def axis_value(result, axis):
    if axis == "inv_eps":
        return 1.0 / result.eps
    if axis == "m":
        return float(result.m)
    if axis == "kappa":
        return result.kappa
    raise ValueError(f"unknown axis {axis!r}")


def fit_points(xs, ys, axis="inv_eps"):
    """Least-squares line through ``(log x, log y)``."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if x.size < 3 or np.unique(x).size < 3:
        raise ValueError("rate fit needs at least three distinct grid points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(1.0, max(0.0, r2)), axis, int(x.size))


def medians(results, axis):
    """Median finite query count per axis value (seeds pooled)."""
    groups = {}
    for r in results:
        v = axis_value(r, axis)
        if v is None or r.queries is None:
            continue
        groups.setdefault(v, []).append(r.queries)
    keys = sorted(groups)
    return keys, [float(np.median(groups[k])) for k in keys]


def fit_rate(results, axis):
    """Fit ``log(median queries)`` against ``log(axis value)``.

    All results must share the values of the other two axes; use
    :func:`group_fits` for mixed result sets.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    others = [a for a in ("eps", "m", "kappa") if a != {"inv_eps": "eps"}.get(axis, axis)]
    for name in others:
        if len({getattr(r, name) for r in results}) > 1:
            raise ValueError(f"results vary in {name}; fit each group separately")
    xs, ys = medians(results, axis)
    return fit_points(xs, ys, axis)


def group_fits(results, axis):
    """``[(group_label, RateFit)]`` for every group with enough finite points."""
    own = {"inv_eps": "eps"}.get(axis, axis)
    others = [a for a in ("eps", "m", "kappa") if a != own]
    groups = {}
    for r in results:
        key = tuple(getattr(r, a) for a in others)
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(-1.0 if v is None else v for v in k)):
        try:
            f = fit_rate(groups[key], axis)
        except ValueError:
            continue
        label = " ".join(f"{a}={v!r}" for a, v in zip(others, key) if v is not None)
        out.append((label, f))
    return out
