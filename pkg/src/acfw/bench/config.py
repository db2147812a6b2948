"""Experiment configuration: a flat ``key = value`` text file plus overrides.

Blank lines and ``#`` comments are ignored. Every key has a default, listed
in ``ExperimentConfig``; unknown keys are rejected.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields

PROBLEMS = (
    "quadratic-simplex", "quadratic-l2ball", "quadratic-span",
    "logistic-l1", "logistic-span", "huber-nuclear", "dictlearn",
)
METHODS = ("AC", "B", "FIXED", "OPEN")
SUBROUTINES = ("CFW", "MP", "PFW", "AFW")
SPAN_PROBLEMS = ("quadratic-span", "logistic-span")
FINITE_PROBLEMS = ("quadratic-simplex", "logistic-l1")
DATA_DIR_ENV = "ACFW_DATA_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "quadratic-simplex"
    method: str = "AC"
    subroutine: str = "CFW"
    seed: int = 0
    # solver
    max_iters: int = 1000
    max_seconds: float = math.inf
    gap_tol: float = 1e-10
    eta: float = 1.5
    delta: float = 1.0
    # problem parameters; None selects the generator's default
    beta: float = None
    lam: float = 0.01
    huber_delta: float = 1.0
    kappa: float = None
    d: int = None
    n: int = None
    m: int = None
    p: int = None
    l: int = None
    rank: int = None
    full_scale: bool = False
    data_path: str = None
    # baselines
    tau_up: float = 2.0
    tau_down: float = 0.9
    L: float = None

    def __post_init__(self):
        validate(self)

    def solver_kwargs(self):
        return dict(max_iters=self.max_iters, max_seconds=self.max_seconds, gap_tol=self.gap_tol,
                    eta=self.eta, delta=self.delta, seed=self.seed)

    def to_dict(self):
        return asdict(self)


def validate(cfg):
    if cfg.problem not in PROBLEMS:
        raise ConfigError(f"unknown problem {cfg.problem!r}; expected one of {', '.join(PROBLEMS)}")
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; expected one of {', '.join(METHODS)}")
    if cfg.subroutine not in SUBROUTINES:
        raise ConfigError(f"unknown subroutine {cfg.subroutine!r}; expected one of {', '.join(SUBROUTINES)}")
    if (cfg.subroutine == "MP") != (cfg.problem in SPAN_PROBLEMS):
        raise ConfigError("MP runs exactly on the linear-span problems "
                          f"({', '.join(SPAN_PROBLEMS)}); got {cfg.subroutine} on {cfg.problem}")
    if cfg.subroutine in ("PFW", "AFW") and cfg.problem not in FINITE_PROBLEMS:
        raise ConfigError(f"{cfg.subroutine} needs a finite dictionary ({', '.join(FINITE_PROBLEMS)})")
    if cfg.method == "OPEN" and cfg.subroutine != "CFW":
        raise ConfigError("the open-loop schedule is defined for CFW only")
    if cfg.method == "FIXED" and cfg.L is None and cfg.problem == "dictlearn":
        raise ConfigError("FIXED on dictlearn needs an explicit L")
    if cfg.data_path is not None and not cfg.problem.startswith("logistic"):
        raise ConfigError("data_path is only used by the logistic problems")
    if not 1.0 < cfg.eta < 2.0:
        raise ConfigError("eta must lie in (1, 2)")
    for name in ("delta", "huber_delta", "tau_up", "tau_down"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    for name in ("beta", "kappa", "d", "n", "m", "p", "l", "rank", "L"):
        val = getattr(cfg, name)
        if val is not None and val <= 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.max_iters < 0 or cfg.gap_tol < 0:
        raise ConfigError("max_iters and gap_tol must be nonnegative")


def _parse_bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(default):
    # field types are strings under postponed annotations; infer from defaults
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return None


_INT_KEYS = {"seed", "max_iters", "d", "n", "m", "p", "l", "rank"}
_FLOAT_KEYS = {"beta", "kappa", "L"}
_STR_KEYS = {"problem", "method", "subroutine", "data_path"}
FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def parse_value(key, text):
    if key not in FIELD_NAMES:
        raise ConfigError(f"unknown key {key!r}")
    text = text.strip()
    if text.lower() in ("none", "") and key not in ("problem", "method", "subroutine"):
        return None
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _STR_KEYS:
            return text
        default = next(f.default for f in fields(ExperimentConfig) if f.name == key)
        return _converter(default)(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_pairs(lines, source="<config>"):
    """``key = value`` lines to a dict of raw strings, with line-numbered errors."""
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def parse_overrides(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = val.strip()
    return out


def build_config(raw):
    return ExperimentConfig(**{k: parse_value(k, v) for k, v in raw.items()})


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = parse_pairs(fh, str(path))
    raw.update(parse_overrides(overrides))
    return build_config(raw)


def format_config(cfg):
    """Inverse of ``load_config``: one ``key = value`` line per field."""
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        lines.append(f"{f.name} = {'none' if val is None else val}")
    return "\n".join(lines) + "\n"


def expand_grid(raw):
    """Cartesian product over comma-separated values, in key order."""
    keys = list(raw)
    combos = [{}]
    for key in keys:
        vals = [v.strip() for v in raw[key].split(",")]
        combos = [dict(c, **{key: v}) for c in combos for v in vals]
    return combos


def resolve_data_path(path):
    """Absolute paths are used as given; relative ones are tried against ``$ACFW_DATA_DIR``."""
    if path is None or os.path.isabs(path) or os.path.exists(path):
        return path
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        cand = os.path.join(base, path)
        if os.path.exists(cand):
            return cand
    return path
