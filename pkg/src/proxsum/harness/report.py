"""CSV and SVG reports of experiment results."""
from dataclasses import dataclass
import csv
import io
import math
import os

from .fit import AXES, group_fits, medians

COLUMNS = ("family", "variant", "m", "eps", "seed", "queries", "kappa",
           "floor_violations", "trace")
EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class RunResult:
    """Outcome of one (problem, seed, eps) run.

    ``queries`` is the number of oracle queries until the suboptimality was
    first measured at or below ``eps``; ``None`` means the budget ran out.
    """

    family: str
    variant: str
    m: int
    eps: float
    seed: int
    queries: int | None
    kappa: float | None = None
    floor_violations: int = 0
    trace: str = ""


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(results, fits=None):
    """CSV body plus a ``#``-prefixed footer with one line per rate fit."""
    if not results:
        raise ValueError("no results to report")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in results:
        q = EXHAUSTED if r.queries is None else r.queries
        w.writerow([r.family, r.variant, r.m, _fmt(r.eps), r.seed, q, _fmt(r.kappa),
                    r.floor_violations, r.trace])
    if fits is None:
        fits = all_fits(results)
    if not fits:
        buf.write("# fit none: no axis has three grid points with finite queries\n")
    for axis, label, f in fits:
        buf.write(f"# fit axis={axis} {label + ' ' if label else ''}slope={f.slope!r} "
                  f"intercept={f.intercept!r} r_squared={f.r_squared!r} n={f.n_points}\n")
    return buf.getvalue()


def all_fits(results):
    return [(axis, label, f) for axis in AXES for label, f in group_fits(results, axis)]


def write_csv(results, path, fits=None):
    text = csv_text(results, fits)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def parse_csv(text):
    """Inverse of :func:`csv_text`: ``(results, footer_lines)``."""
    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    footer = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("not a results file: unexpected header")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        d = dict(zip(COLUMNS, row))
        out.append(RunResult(
            family=d["family"], variant=d["variant"], m=int(d["m"]), eps=float(d["eps"]),
            seed=int(d["seed"]),
            queries=None if d["queries"] == EXHAUSTED else int(d["queries"]),
            kappa=float(d["kappa"]) if d["kappa"] else None,
            floor_violations=int(d["floor_violations"]), trace=d["trace"]))
    return out, footer


def read_csv(path):
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


# SVG ---------------------------------------------------------------------------
_W, _H, _PAD = 480, 360, 60


def svg_text(results, axis, fit=None, title=""):
    """Self-contained log-log plot of median queries with the fitted line."""
    xs, ys = medians(results, axis)
    if not xs:
        raise ValueError("no finite points to plot")
    lx = [math.log10(x) for x in xs]
    ly = [math.log10(y) for y in ys]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if fit is not None:
        fy = [fit.intercept / math.log(10) + fit.slope * v for v in (x0, x1)]
        y0, y1 = min(y0, *fy), max(y1, *fy)
    x0, x1 = math.floor(x0 * 4) / 4 - 0.05, math.ceil(x1 * 4) / 4 + 0.05
    y0, y1 = math.floor(y0 * 4) / 4 - 0.05, math.ceil(y1 * 4) / 4 + 0.05

    def px(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
           f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>']
    for e in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<text x="{px(e):.2f}" y="{_H - _PAD + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<text x="{_PAD - 6}" y="{py(e) + 4:.2f}" text-anchor="end">1e{e}</text>')
    label = {"inv_eps": "1/eps", "m": "m", "kappa": "kappa"}[axis]
    out.append(f'<text x="{_W / 2:.2f}" y="{_H - 18}" text-anchor="middle">{label}</text>')
    out.append(f'<text x="16" y="{_H / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_H / 2:.2f})">queries</text>')
    if title:
        out.append(f'<text x="{_W / 2:.2f}" y="24" text-anchor="middle">{_esc(title)}</text>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3.5" fill="#1f5fa8"/>')
    if fit is not None:
        xa, xb = min(lx), max(lx)
        ya = fit.intercept / math.log(10) + fit.slope * xa
        yb = fit.intercept / math.log(10) + fit.slope * xb
        out.append(f'<line x1="{px(xa):.2f}" y1="{py(ya):.2f}" x2="{px(xb):.2f}" '
                   f'y2="{py(yb):.2f}" stroke="#c0392b" stroke-dasharray="5,3"/>')
        out.append(f'<text x="{_W - _PAD}" y="{_PAD - 8}" text-anchor="end">'
                   f'slope {fit.slope:.3f} (R2 {fit.r_squared:.3f})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(results, path, axis, fit=None, title=""):
    text = svg_text(results, axis, fit, title)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def emit_report(results, out_dir, name, fmt="csv", axis="inv_eps", fit=None):
    """Write ``<name>.csv`` or ``<name>.svg`` into ``out_dir``; nothing on empty input."""
    if not results:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        return write_csv(results, os.path.join(out_dir, name + ".csv"))
    if fmt == "svg":
        return write_svg(results, os.path.join(out_dir, name + ".svg"), axis, fit, name)
    raise ValueError(f"unknown format {fmt!r}")
