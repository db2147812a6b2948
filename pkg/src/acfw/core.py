"""Auto-conditioned Frank-Wolfe outer loop.

The closed-loop step ``min{g'd / (L ||d||^2), gamma_max}`` normally needs the
global gradient Lipschitz constant ``L``. Here ``L`` is replaced by a running
estimate ``L_t`` fed by the local curvature measured at the trial point and
shrunk each iteration by a damping factor ``r_t < 1``, so the estimate can
both grow and decay. Each iteration costs exactly one objective value (at
the trial point); the trial is accepted only if it strictly decreases ``f``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .atoms import SPAN
from .subroutines import make_subroutine


class NumericalBreakdown(FloatingPointError):
    """Objective returned a non-finite value or gradient."""


# ulps of the differenced terms treated as rounding noise in the estimator
ELL_NOISE_ULPS = 4.0
_EPS = float(np.finfo(float).eps)


def local_lipschitz_estimate(f_x, f_y, grad_x, x, y):
    """``2|f(y) - f(x) - g'(y - x)| / ||y - x||^2``, or 0 when ``y`` is ``x``.

    The numerator is reduced by the floating-point noise of the three terms
    it differences. Without this, tiny steps late in a run divide rounding
    error by ``||y - x||^2`` and report curvature far above the true one.
    """
    if not (math.isfinite(f_x) and math.isfinite(f_y)):
        raise NumericalBreakdown(f"non-finite objective values f_x={f_x}, f_y={f_y}")
    x = np.asarray(x, dtype=float)
    step = np.asarray(y, dtype=float) - x
    dist = float(np.linalg.norm(step))
    if dist <= 1e-12 * (1.0 + float(np.linalg.norm(x))):
        return 0.0
    lin = float(np.dot(grad_x, step))
    if not math.isfinite(lin):
        raise NumericalBreakdown("non-finite gradient")
    noise = ELL_NOISE_ULPS * _EPS * (abs(f_x) + abs(f_y) + abs(lin))
    return 2.0 * max(abs(f_y - f_x - lin) - noise, 0.0) / (dist * dist)


def damping_factor(t, delta=1.0):
    """``r_t = 1 - 1 / ((t + 1) log^(1+delta)(t + 3))`` with the natural log."""
    if t < 0 or delta <= 0:
        raise ValueError("need t >= 0 and delta > 0")
    return 1.0 - 1.0 / ((t + 1) * math.log(t + 3) ** (1.0 + delta))


def step_size(grad_dot_d, L_t, d_norm_sq, gamma_max):
    if d_norm_sq <= 0:
        raise ValueError("zero direction: the caller must stop as stationary")
    return min(grad_dot_d / (L_t * d_norm_sq), gamma_max)


def update_estimate(ell, r_t, L_t):
    return max(ell, r_t * L_t)


def classify_iteration(L_t, L_next, gamma, gamma_max, eta):
    """Membership in the significant-descent set and the good-iteration set."""
    in_I = L_next <= eta * L_t
    in_G = gamma_max >= 1.0 or gamma < gamma_max
    return bool(in_I), bool(in_G)


def gap_from_atom(grad, x, v, kind):
    if kind == SPAN:
        # symmetric atoms: max_a g'a = -min_a g'a
        return -float(grad @ v)
    return float(grad @ (x - v))


def fw_gap(grad, x, dictionary):
    _, v = dictionary.lmo(grad)
    return gap_from_atom(grad, x, v, dictionary.kind)


@dataclass
class SolverConfig:
    max_iters: int = 1000
    max_seconds: float = math.inf
    gap_tol: float = 1e-10
    eta: float = 1.5
    delta: float = 1.0
    L_floor: float = 1e-12
    seed: int = 0
    track_drift: bool = False

    def __post_init__(self):
        if not 1.0 < self.eta < 2.0:
            raise ValueError("eta must lie in (1, 2)")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be nonnegative")
        if self.L_floor <= 0:
            raise ValueError("L_floor must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass
class IterRecord:
    t: int
    f: float
    gap: float
    gamma: float
    gamma_max: float
    L_t: float
    accepted: bool
    in_I_eta: bool
    in_G: bool
    n_f: int
    n_g: int
    n_lmo: int
    elapsed_s: float
    # not part of the CSV layout
    L_next: float = math.nan
    f_trial: float = math.nan
    grad_dot_d: float = math.nan
    d_norm_sq: float = math.nan
    r_cum: float = math.nan
    step_kind: str = ""
    drift: float = math.nan


CSV_FIELDS = [f.name for f in fields(IterRecord)][:13]


@dataclass
class Trace:
    records: list = field(default_factory=list)
    status: str = "running"
    method: str = "AC"
    subroutine: str = "CFW"
    L0: float = math.nan
    eta: float = 1.5
    delta: float = 1.0
    final_f: float = math.nan
    final_gap: float = math.nan
    x: np.ndarray = None
    n_f: int = 0
    n_g: int = 0
    n_lmo: int = 0
    elapsed_s: float = 0.0
    active_size: int = 0
    final_drift: float = 0.0

    @property
    def label(self):
        return f"{self.method}-{self.subroutine}"

    @property
    def iterations(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


class AutoConditioned:
    """The auto-conditioned step rule: one trial evaluation, accept on strict decrease."""

    method = "AC"

    def __init__(self, delta=1.0):
        self.delta = delta

    def start(self, L0):
        self.L = L0
        self.r_cum = 1.0

    def step(self, t, objective, x, f, grad, d, gd, dn2, gmax):
        L_t = self.L
        gamma = step_size(gd, L_t, dn2, gmax)
        trial = x - gamma * d
        f_trial = objective.value(trial)
        ell = local_lipschitz_estimate(f, f_trial, grad, x, trial)
        r_t = damping_factor(t, self.delta)
        self.r_cum *= r_t
        self.L = update_estimate(ell, r_t, L_t)
        return gamma, trial, f_trial, f_trial < f, L_t, self.L


def _check_pairing(dictionary, subroutine):
    name = subroutine.name
    if name == "MP":
        if dictionary.kind != SPAN or not dictionary.symmetric:
            raise ValueError("MP needs a symmetric linear-span dictionary")
    elif dictionary.kind == SPAN:
        raise ValueError(f"{name} needs a convex-hull dictionary")
    if subroutine.needs_active_set and not dictionary.finite:
        raise ValueError(f"{name} needs a finite, enumerable dictionary")


def solve(objective, dictionary, subroutine, config, rule):
    """Shared outer loop; ``rule`` decides the step and the acceptance."""
    if isinstance(subroutine, str):
        subroutine = make_subroutine(subroutine)
    _check_pairing(dictionary, subroutine)
    clock = time.perf_counter
    start = clock()
    objective.reset_counters()
    n_lmo = 0

    # initialization: x_{-1} an atom, x_0 the LMO answer at x_{-1}
    xm1_id, x_prev = dictionary.initial_atom(config.seed)
    f_prev, g_prev = objective.value_and_gradient(x_prev)
    x0_id, x = dictionary.lmo(g_prev)
    n_lmo += 1
    f = objective.value(x)
    L0 = max(local_lipschitz_estimate(f_prev, f, g_prev, x_prev, x), config.L_floor)
    grad = objective.gradient(x)
    if not np.all(np.isfinite(grad)):
        raise NumericalBreakdown("non-finite gradient at x_0")
    rule.start(L0)
    subroutine.start(x0_id, x)

    trace = Trace(method=rule.method, subroutine=subroutine.name, L0=L0,
                  eta=config.eta, delta=getattr(rule, "delta", config.delta))
    records = trace.records
    stop_floor = config.gap_tol * 1e-3

    t = 0
    while True:
        v_id, v = dictionary.lmo(grad)
        n_lmo += 1
        gap = gap_from_atom(grad, x, v, dictionary.kind)
        if gap <= config.gap_tol:
            trace.status = "converged"
            break
        if t >= config.max_iters:
            trace.status = "max_iters"
            break
        if clock() - start >= config.max_seconds:
            trace.status = "max_seconds"
            break
        prop = subroutine.propose(v_id, v, x, grad)
        d = prop.d
        gd = float(grad @ d)
        dn2 = float(d @ d)
        if gd <= stop_floor or math.sqrt(dn2) <= 1e-14:
            trace.status = "stationary-pair" if subroutine.name == "PFW" and prop.fw_atom == prop.away_atom \
                else "stationary"
            break

        gamma, trial, f_trial, accepted, L_t, L_next = rule.step(
            t, objective, x, f, grad, d, gd, dn2, prop.gamma_max)
        in_I, in_G = classify_iteration(L_t, L_next, gamma, prop.gamma_max, config.eta)
        subroutine.apply(accepted, gamma)
        f_t = f
        if accepted:
            x, f = trial, f_trial
            grad = objective.gradient(x)
            if not np.all(np.isfinite(grad)):
                raise NumericalBreakdown(f"non-finite gradient at iteration {t}")
        drift = subroutine.drift(x) if config.track_drift else math.nan
        records.append(IterRecord(
            t=t, f=f_t, gap=gap, gamma=gamma, gamma_max=prop.gamma_max, L_t=L_t,
            accepted=bool(accepted), in_I_eta=in_I, in_G=in_G,
            n_f=objective.n_value, n_g=objective.n_gradient, n_lmo=n_lmo,
            elapsed_s=clock() - start, L_next=L_next, f_trial=f_trial,
            grad_dot_d=gd, d_norm_sq=dn2, r_cum=getattr(rule, "r_cum", math.nan),
            step_kind=prop.step_kind, drift=drift,
        ))
        t += 1

    trace.final_f = f
    trace.final_gap = gap
    trace.x = x
    trace.n_f, trace.n_g = objective.counters
    trace.n_lmo = n_lmo
    trace.elapsed_s = clock() - start
    trace.active_size = len(subroutine.active) if subroutine.active is not None else 0
    trace.final_drift = subroutine.drift(x)
    return trace


def run(objective, dictionary, subroutine="CFW", config=None):
    """Run the auto-conditioned method and return its ``Trace``."""
    config = config or SolverConfig()
    return solve(objective, dictionary, subroutine, config, AutoConditioned(config.delta))
