"""Experiment configuration files.

An INI file with four sections::

    [problem]
    family = median            ; median, least_squares, smooth_chain,
                               ; spectral_quadratic, det_adversary, rand_instance
    variant =                  ; adversary/instance variant
    m = 4, 16                  ; one or more values
    eps = 0.02, 0.01, 0.005    ; strictly decreasing
    seeds = 0, 1, 2

    [solver]
    name = smoothed_agd

    [measure]
    budget = 100000

    [output]
    dir = results
    name = median_agd

Numbers may be given as lists where noted; everything else is scalar.
"""
from dataclasses import dataclass, field
import configparser

from ..algorithms import SolverConfig

FAMILIES = ("median", "least_squares", "smooth_chain", "spectral_quadratic",
            "det_adversary", "rand_instance")
SOLVER_NAMES = ("gd", "subgradient_descent", "agd", "sgd", "svrg", "catalyst_svrg",
                "cyclic_prox", "smoothed_agd", "smoothed_catalyst")

_PROBLEM_KEYS = {
    "family": "str", "variant": "str", "m": "intlist", "eps": "floatlist",
    "eps0": "float", "L": "float", "B": "float", "gamma": "float", "lam": "float",
    "kappa": "floatlist", "d": "int", "seeds": "intlist",
}
_SOLVER_KEYS = {
    "name": "str", "step": "float", "epoch_length": "int", "catalyst_kappa": "float",
    "inner_epochs": "int", "inner_step_scale": "float",
}
_MEASURE_KEYS = {"budget": "int", "cadence": "int", "strict": "bool"}
_OUTPUT_KEYS = {"dir": "str", "name": "str", "traces": "bool", "svg": "bool"}
_SECTIONS = {"problem": _PROBLEM_KEYS, "solver": _SOLVER_KEYS,
             "measure": _MEASURE_KEYS, "output": _OUTPUT_KEYS}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    family: str
    m: list
    eps: list
    seeds: list
    solver: str
    budget: int
    variant: str = ""
    eps0: float | None = None
    L: float = 1.0
    B: float | None = None
    gamma: float = 1.0
    lam: float = 0.0
    kappa: list = field(default_factory=list)
    d: int | None = None
    step: float | None = None
    epoch_length: int | None = None
    catalyst_kappa: float | None = None
    inner_epochs: int | None = None
    inner_step_scale: float = 0.3
    cadence: int | None = None
    strict: bool = False
    out_dir: str = "results"
    name: str = "experiment"
    traces: bool = True
    svg: bool = True

    def solver_config(self, seed, target=None, budget=None):
        return SolverConfig(budget=budget or self.budget, seed=seed, step=self.step,
                            epoch_length=self.epoch_length, kappa=self.catalyst_kappa,
                            inner_epochs=self.inner_epochs,
                            inner_step_scale=self.inner_step_scale,
                            cadence=self.cadence, target=target)


def _convert(kind, raw):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    parts = [p for p in raw.replace(",", " ").split() if p]
    conv = int if kind == "intlist" else float
    return [conv(p) for p in parts]


def parse_config(text, source="<string>"):
    """Parse and validate configuration text; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from None
    errors = []
    values = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            errors.append(f"unknown section [{sec}]")
            continue
        keys = _SECTIONS[sec]
        for key, raw in cp.items(sec):
            if key not in keys:
                errors.append(f"unknown key {key!r} in [{sec}]")
                continue
            if raw.strip() == "":
                continue
            try:
                values[(sec, key)] = _convert(keys[key], raw)
            except ValueError as exc:
                errors.append(f"[{sec}] {key}: {exc}")

    def get(sec, key, default=None):
        return values.get((sec, key), default)

    for sec, key in (("problem", "family"), ("problem", "m"), ("problem", "eps"),
                     ("solver", "name"), ("measure", "budget")):
        if (sec, key) not in values:
            errors.append(f"missing required key {key!r} in [{sec}]")
    family = get("problem", "family")
    if family is not None and family not in FAMILIES:
        errors.append(f"unknown family {family!r}")
    solver = get("solver", "name")
    if solver is not None and solver not in SOLVER_NAMES:
        errors.append(f"unknown solver {solver!r}")
    eps = get("problem", "eps", [])
    if eps:
        if any(e <= 0 for e in eps):
            errors.append("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            errors.append("eps grid not decreasing")
    m = get("problem", "m", [])
    if m and any(v < 1 for v in m):
        errors.append("m values must be positive")
    seeds = get("problem", "seeds", [0])
    if not seeds:
        errors.append("at least one seed is required")
    if get("measure", "budget", 1) < 1:
        errors.append("budget must be positive")
    if family in ("det_adversary", "rand_instance") and not get("problem", "variant"):
        errors.append(f"family {family!r} needs a variant")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        family=family, m=m, eps=eps, seeds=seeds, solver=solver,
        budget=get("measure", "budget"), variant=get("problem", "variant", ""),
        eps0=get("problem", "eps0"), L=get("problem", "L", 1.0), B=get("problem", "B"),
        gamma=get("problem", "gamma", 1.0), lam=get("problem", "lam", 0.0),
        kappa=get("problem", "kappa", []), d=get("problem", "d"),
        step=get("solver", "step"), epoch_length=get("solver", "epoch_length"),
        catalyst_kappa=get("solver", "catalyst_kappa"),
        inner_epochs=get("solver", "inner_epochs"),
        inner_step_scale=get("solver", "inner_step_scale", 0.3),
        cadence=get("measure", "cadence"), strict=get("measure", "strict", False),
        out_dir=get("output", "dir", "results"), name=get("output", "name", "experiment"),
        traces=get("output", "traces", True), svg=get("output", "svg", True),
    )


def load_config(path):
    """Read and validate a configuration file."""
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))
