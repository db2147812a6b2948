"""Comparison step-size rules: open-loop, fixed global ``L``, and backtracking.

All three plug into the same outer loop as the auto-conditioned method
(``core.solve``), so runs differ only in how ``gamma`` is chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import SolverConfig, solve, step_size


class BacktrackingError(RuntimeError):
    pass


def open_loop_gamma(t, convex=True):
    if t < 0:
        raise ValueError("t must be nonnegative")
    return 2.0 / (t + 2.0) if convex else 1.0 / math.sqrt(t + 1.0)


def fixed_L_gamma(grad_dot_d, L, d_norm_sq, gamma_max):
    return step_size(grad_dot_d, L, d_norm_sq, gamma_max)


@dataclass
class BacktrackState:
    L_hat: float
    tau_up: float = 2.0
    tau_down: float = 0.9
    evals_this_iter: int = 0

    def __post_init__(self):
        if self.L_hat <= 0:
            raise ValueError("L_hat must be positive")
        if not (self.tau_up > 1.0 >= self.tau_down > 0.0):
            raise ValueError("need tau_up > 1 >= tau_down > 0")


MAX_DOUBLINGS = 100


def backtracking_step(objective, x, f_x, grad, d, gamma_max, state):
    """Shrink-then-grow curvature search on the quadratic upper model.

    ``state.L_hat`` is first decreased by ``tau_down``; then it is multiplied
    by ``tau_up`` until ``f(x - gamma d) <= f(x) - gamma g'd + L_hat/2 gamma^2 ||d||^2``.
    Returns ``(gamma, f_new, evals)`` and updates ``state`` in place.
    """
    gd = float(grad @ d)
    dn2 = float(d @ d)
    if dn2 <= 0:
        raise ValueError("zero direction")
    state.L_hat *= state.tau_down
    state.evals_this_iter = 0
    for _ in range(MAX_DOUBLINGS + 1):
        gamma = min(gd / (state.L_hat * dn2), gamma_max)
        f_new = objective.value(x - gamma * d)
        state.evals_this_iter += 1
        if f_new <= f_x - gamma * gd + 0.5 * state.L_hat * gamma * gamma * dn2:
            return gamma, f_new, state.evals_this_iter
        state.L_hat *= state.tau_up
    raise BacktrackingError(
        f"sufficient decrease not reached after {MAX_DOUBLINGS} increases (L_hat={state.L_hat:.3e})"
    )


class FixedL:
    method = "FIXED"

    def __init__(self, L):
        if L is None or L <= 0:
            raise ValueError("the fixed rule needs a positive global L")
        self.L = float(L)

    def start(self, L0):
        pass

    def step(self, t, objective, x, f, grad, d, gd, dn2, gmax):
        gamma = fixed_L_gamma(gd, self.L, dn2, gmax)
        trial = x - gamma * d
        return gamma, trial, objective.value(trial), True, self.L, self.L


class OpenLoop:
    method = "OPEN"

    def __init__(self, convex=True):
        self.convex = convex

    def start(self, L0):
        self.L0 = L0

    def step(self, t, objective, x, f, grad, d, gd, dn2, gmax):
        gamma = min(open_loop_gamma(t, self.convex), gmax)
        trial = x - gamma * d
        # value only feeds the trace
        return gamma, trial, objective.value(trial), True, self.L0, self.L0


class Backtracking:
    method = "B"

    def __init__(self, tau_up=2.0, tau_down=0.9):
        self.tau_up = tau_up
        self.tau_down = tau_down

    def start(self, L0):
        self.state = BacktrackState(L0, self.tau_up, self.tau_down)

    def step(self, t, objective, x, f, grad, d, gd, dn2, gmax):
        L_prev = self.state.L_hat
        gamma, f_new, _ = backtracking_step(objective, x, f, grad, d, gmax, self.state)
        return gamma, x - gamma * d, f_new, True, L_prev, self.state.L_hat


def run_fixed(objective, dictionary, subroutine="CFW", config=None, L=None):
    config = config or SolverConfig()
    return solve(objective, dictionary, subroutine, config, FixedL(L if L is not None else objective.lipschitz))


def run_open_loop(objective, dictionary, subroutine="CFW", config=None, convex=True):
    config = config or SolverConfig()
    return solve(objective, dictionary, subroutine, config, OpenLoop(convex))


def run_backtracking(objective, dictionary, subroutine="CFW", config=None, tau_up=2.0, tau_down=0.9):
    config = config or SolverConfig()
    return solve(objective, dictionary, subroutine, config, Backtracking(tau_up, tau_down))
