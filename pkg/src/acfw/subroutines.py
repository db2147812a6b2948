"""Direction-finding subroutines: closed-loop FW, matching pursuit, pairwise, away-step.

Each subroutine turns the LMO atom ``v_t`` into a direction ``d_t`` and a
maximal step ``gamma_max`` such that ``x_t - gamma d_t`` stays feasible for
every ``gamma`` in ``[0, gamma_max]``. Pairwise and away-step variants keep
an ``ActiveSet`` certificate of the iterate as a convex combination of
atoms; the pure ``*_step``/``*_apply`` functions never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FW, AW, MP, PW = "FW", "AW", "MP", "PW"
PRUNE_TOL = 1e-12
RENORMALIZE_EVERY = 512


class ActiveSetError(RuntimeError):
    pass


@dataclass
class ActiveSet:
    weights: dict = field(default_factory=dict)
    atoms: dict = field(default_factory=dict)

    @classmethod
    def singleton(cls, atom_id, atom):
        return cls({atom_id: 1.0}, {atom_id: np.asarray(atom, dtype=float)})

    def copy(self):
        return ActiveSet(dict(self.weights), dict(self.atoms))

    def __len__(self):
        return len(self.weights)

    def total(self):
        return float(sum(self.weights.values()))

    def pruned(self, tol=PRUNE_TOL):
        keep = {k: w for k, w in self.weights.items() if w > tol}
        return ActiveSet(keep, {k: self.atoms[k] for k in keep})

    def renormalized(self):
        tot = self.total()
        return ActiveSet({k: w / tot for k, w in self.weights.items()}, dict(self.atoms))


def reconstruct(active):
    if not active.weights:
        raise ActiveSetError("empty active set")
    return sum(w * active.atoms[k] for k, w in active.weights.items())


@dataclass
class DirectionProposal:
    d: np.ndarray
    gamma_max: float
    step_kind: str
    away_atom: object = None
    fw_atom: object = None


def cfw_direction(v, x):
    return DirectionProposal(np.asarray(x) - np.asarray(v), 1.0, FW)


def mp_direction(v):
    return DirectionProposal(-np.asarray(v, dtype=float), np.inf, MP)


def _away_atom(active, grad):
    if not active.weights:
        raise ActiveSetError("empty active set")
    # sorted ids give the lowest-id tie-break
    best_id, best_val = None, -np.inf
    for k in sorted(active.weights):
        val = float(grad @ active.atoms[k])
        if val > best_val:
            best_id, best_val = k, val
    return best_id


def pfw_step(v_id, v, x, active, grad):
    """Pairwise direction: move mass from the worst active atom to ``v``."""
    s_id = _away_atom(active, grad)
    d = active.atoms[s_id] - np.asarray(v, dtype=float)
    return DirectionProposal(d, active.weights[s_id], PW, away_atom=s_id, fw_atom=v_id)


def pfw_apply(active, accepted, s_id, v_id, gamma, v=None):
    if not accepted:
        return active
    new = active.copy()
    new.weights[s_id] = new.weights[s_id] - gamma
    if v_id not in new.weights:
        if v is None:
            raise ActiveSetError("new atom vector required when v is not active")
        new.weights[v_id] = 0.0
        new.atoms[v_id] = np.asarray(v, dtype=float)
    new.weights[v_id] += gamma
    return new.pruned()


def afw_step(v_id, v, x, active, grad):
    """Away-step rule: FW direction unless the away direction is steeper."""
    s_id = _away_atom(active, grad)
    s = active.atoms[s_id]
    x = np.asarray(x, dtype=float)
    if grad @ (x - v) >= grad @ (s - x):
        return DirectionProposal(x - v, 1.0, FW, away_atom=s_id, fw_atom=v_id)
    alpha = active.weights[s_id]
    gmax = np.inf if alpha >= 1.0 else alpha / (1.0 - alpha)
    return DirectionProposal(s - x, gmax, AW, away_atom=s_id, fw_atom=v_id)


def afw_apply(active, accepted, step_kind, atom_id, gamma, v=None):
    """Update weights after an away-step iteration.

    ``atom_id`` is ``v_t`` for a FW step and ``s_t`` for an away step.
    """
    if not accepted:
        return active
    new = active.copy()
    if step_kind == FW:
        for k in new.weights:
            new.weights[k] *= 1.0 - gamma
        if atom_id not in new.weights:
            if v is None:
                raise ActiveSetError("new atom vector required when v is not active")
            new.weights[atom_id] = 0.0
            new.atoms[atom_id] = np.asarray(v, dtype=float)
        new.weights[atom_id] += gamma
    elif step_kind == AW:
        for k in new.weights:
            new.weights[k] *= 1.0 + gamma
        new.weights[atom_id] -= gamma
    else:
        raise ValueError(f"unknown step kind {step_kind!r}")
    return new.pruned()


class Subroutine:
    """Stateful wrapper used by the solver loop."""

    name = None
    needs_active_set = False

    def start(self, x0_id, x0):
        self.active = None
        self.iteration = 0

    def propose(self, v_id, v, x, grad):
        raise NotImplementedError

    def apply(self, accepted, gamma):
        self.iteration += 1

    def drift(self, x):
        return 0.0


class CFW(Subroutine):
    name = "CFW"

    def propose(self, v_id, v, x, grad):
        return cfw_direction(v, x)


class MatchingPursuit(Subroutine):
    name = "MP"

    def propose(self, v_id, v, x, grad):
        return mp_direction(v)


class _ActiveSetSubroutine(Subroutine):
    needs_active_set = True

    def start(self, x0_id, x0):
        super().start(x0_id, x0)
        self.active = ActiveSet.singleton(x0_id, x0)
        self._last = None

    def apply(self, accepted, gamma):
        self.active = self._apply(accepted, gamma)
        super().apply(accepted, gamma)
        if self.iteration % RENORMALIZE_EVERY == 0:
            self.active = self.active.renormalized()

    def drift(self, x):
        return float(np.linalg.norm(reconstruct(self.active) - x))


class Pairwise(_ActiveSetSubroutine):
    name = "PFW"

    def propose(self, v_id, v, x, grad):
        prop = pfw_step(v_id, v, x, self.active, grad)
        self._last = (prop, v)
        return prop

    def _apply(self, accepted, gamma):
        prop, v = self._last
        return pfw_apply(self.active, accepted, prop.away_atom, prop.fw_atom, gamma, v)


class AwayStep(_ActiveSetSubroutine):
    name = "AFW"

    def propose(self, v_id, v, x, grad):
        prop = afw_step(v_id, v, x, self.active, grad)
        self._last = (prop, v)
        return prop

    def _apply(self, accepted, gamma):
        prop, v = self._last
        atom_id = prop.fw_atom if prop.step_kind == FW else prop.away_atom
        return afw_apply(self.active, accepted, prop.step_kind, atom_id, gamma, v)


SUBROUTINES = {"CFW": CFW, "MP": MatchingPursuit, "PFW": Pairwise, "AFW": AwayStep}


def make_subroutine(name):
    try:
        return SUBROUTINES[name]()
    except KeyError:
        raise ValueError(f"unknown subroutine {name!r}; expected one of {sorted(SUBROUTINES)}") from None
