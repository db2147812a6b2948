import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acfw import SolverConfig, run
from acfw.subroutines import (AW, FW, MP, PW, ActiveSet, ActiveSetError, afw_apply, afw_step,
                              cfw_direction, make_subroutine, mp_direction, pfw_apply, pfw_step,
                              reconstruct)
from acfw.bench.synthetic import quadratic_simplex, quadratic_span


def aset(entries):
    """{id: (weight, atom)} -> ActiveSet"""
    return ActiveSet({k: w for k, (w, _) in entries.items()},
                     {k: np.asarray(a, dtype=float) for k, (_, a) in entries.items()})


def test_cfw_direction():
    p = cfw_direction(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    assert np.allclose(p.d, [-0.5, 0.5])
    assert p.gamma_max == 1.0 and p.step_kind == FW


def test_cfw_direction_norm_within_diameter():
    p = cfw_direction(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
    assert np.linalg.norm(p.d) == pytest.approx(math.sqrt(2))


def test_mp_direction():
    p = mp_direction(np.array([0.0, -1.0]))
    assert np.array_equal(p.d, [0.0, 1.0])
    assert p.gamma_max == math.inf and p.step_kind == MP


def test_pfw_step_example():
    act = aset({0: (0.6, [1.0, 0.0]), 1: (0.4, [0.0, 1.0])})
    x = reconstruct(act)
    p = pfw_step(1, np.array([0.0, 1.0]), x, act, np.array([1.0, -1.0]))
    assert p.away_atom == 0 and p.fw_atom == 1
    assert np.allclose(p.d, [1.0, -1.0])
    assert p.gamma_max == pytest.approx(0.6)
    assert p.step_kind == PW


def test_pfw_singleton_gamma_max():
    act = ActiveSet.singleton(0, [1.0, 0.0])
    p = pfw_step(1, np.array([0.0, 1.0]), np.array([1.0, 0.0]), act, np.array([1.0, 0.0]))
    assert p.gamma_max == 1.0


def test_pfw_coincident_atoms_zero_direction():
    act = ActiveSet.singleton(0, [1.0, 0.0])
    p = pfw_step(0, np.array([1.0, 0.0]), np.array([1.0, 0.0]), act, np.array([1.0, 2.0]))
    assert not np.any(p.d)


def test_pfw_apply_transfer():
    act = aset({"a": (0.6, [1, 0, 0]), "b": (0.4, [0, 1, 0])})
    new = pfw_apply(act, True, "a", "c", 0.25, v=np.array([0, 0, 1.0]))
    assert new.weights == pytest.approx({"a": 0.35, "b": 0.4, "c": 0.25})
    assert act.weights == {"a": 0.6, "b": 0.4}  # pure update


def test_pfw_apply_drop_and_reject():
    act = aset({"a": (0.6, [1, 0]), "b": (0.4, [0, 1])})
    assert set(pfw_apply(act, True, "a", "b", 0.6).weights) == {"b"}
    assert pfw_apply(act, False, "a", "b", 0.3) is act


def test_pfw_apply_needs_vector_for_new_atom():
    with pytest.raises(ActiveSetError):
        pfw_apply(ActiveSet.singleton(0, [1.0]), True, 0, 1, 0.5)


def test_afw_step_branches():
    act = aset({0: (0.25, [1.0, 0.0]), 1: (0.75, [0.0, 0.0])})
    x = reconstruct(act)
    g = np.array([1.0, 0.0])
    # g'(x - v) = 2 >= g'(s - x) = 0.75: FW step
    p = afw_step(2, np.array([-1.75, 0.0]), x, act, g)
    assert p.step_kind == FW and p.gamma_max == 1.0
    # g'(x - v) = 0.25 < 0.75: away step off atom 0
    p = afw_step(1, np.array([0.0, 0.0]), x, act, g)
    assert p.step_kind == AW
    assert p.away_atom == 0
    assert p.gamma_max == pytest.approx(1.0 / 3.0)


def test_afw_tie_selects_fw():
    act = aset({0: (0.5, [1.0, 0.0]), 1: (0.5, [0.0, 0.0])})
    x = reconstruct(act)
    # g'(x - v) = g'(s - x) = 0.5
    p = afw_step(2, np.array([0.0, 0.0]), x, act, np.array([1.0, 0.0]))
    assert p.step_kind == FW


def test_afw_singleton_prefers_fw():
    act = ActiveSet.singleton(0, [1.0, 0.0])
    p = afw_step(1, np.array([0.0, 1.0]), np.array([1.0, 0.0]), act, np.array([1.0, 0.0]))
    assert p.step_kind == FW


def test_afw_apply_examples():
    act = ActiveSet.singleton("a", [1.0, 0.0])
    new = afw_apply(act, True, FW, "b", 0.5, v=np.array([0.0, 1.0]))
    assert new.weights == pytest.approx({"a": 0.5, "b": 0.5})
    drop = afw_apply(new, True, AW, "a", 1.0)
    assert drop.weights == pytest.approx({"b": 1.0})
    assert afw_apply(new, False, AW, "a", 1.0) is new


def test_reconstruct():
    act = aset({0: (0.3, [1, 0]), 1: (0.7, [0, 1])})
    assert np.allclose(reconstruct(act), [0.3, 0.7])
    assert np.array_equal(reconstruct(ActiveSet.singleton(5, [2.0, 3.0])), [2.0, 3.0])


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.integers(0, 10 ** 6))
def test_pfw_transfer_conserves_mass(ws, seed):
    ws = np.array(ws) / np.sum(ws)
    rng = np.random.default_rng(seed)
    atoms = np.eye(len(ws) + 1)
    act = ActiveSet({i: w for i, w in enumerate(ws)}, {i: atoms[i] for i in range(len(ws))})
    g = rng.standard_normal(len(ws) + 1)
    v_id = int(np.argmin(atoms @ g))
    p = pfw_step(v_id, atoms[v_id], reconstruct(act), act, g)
    assert g @ p.d >= -1e-12
    gamma = rng.uniform(0, p.gamma_max)
    new = pfw_apply(act, True, p.away_atom, v_id, gamma, v=atoms[v_id])
    assert abs(new.total() - 1.0) <= 1e-12
    assert all(w > 0 for w in new.weights.values())


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.integers(0, 10 ** 6),
       st.floats(0.0, 1.0))
def test_afw_segment_stays_feasible(ws, seed, frac):
    ws = np.array(ws) / np.sum(ws)
    k = len(ws)
    rng = np.random.default_rng(seed)
    atoms = np.eye(k + 1)
    act = ActiveSet({i: w for i, w in enumerate(ws)}, {i: atoms[i] for i in range(k)})
    x = reconstruct(act)
    g = rng.standard_normal(k + 1)
    v_id = int(np.argmin(atoms @ g))
    p = afw_step(v_id, atoms[v_id], x, act, g)
    assert g @ p.d >= -1e-12
    gamma = frac * (p.gamma_max if math.isfinite(p.gamma_max) else 1.0)
    atom_id = v_id if p.step_kind == FW else p.away_atom
    new = afw_apply(act, True, p.step_kind, atom_id, gamma, v=atoms[v_id])
    y = x - gamma * p.d
    assert y.min() >= -1e-12 and abs(y.sum() - 1) <= 1e-12
    assert np.linalg.norm(reconstruct(new) - y) <= 1e-10


def test_afw_full_away_step_removes_one_atom():
    act = aset({0: (0.2, [1, 0, 0]), 1: (0.3, [0, 1, 0]), 2: (0.5, [0, 0, 1])})
    g = np.array([5.0, 0.0, 0.0])
    x = reconstruct(act)
    p = afw_step(1, np.array([0, 1.0, 0]), x, act, g)
    assert p.step_kind == AW and p.away_atom == 0
    new = afw_apply(act, True, AW, 0, p.gamma_max)
    assert set(new.weights) == {1, 2}


@pytest.mark.parametrize("sub", ["PFW", "AFW"])
def test_active_set_drift_after_long_run(sub):
    inst = quadratic_simplex(5, d=30, kappa=10)
    tr = run(inst.objective, inst.dictionary, sub,
             SolverConfig(max_iters=1000, gap_tol=0.0, track_drift=True))
    x = tr.x
    assert tr.final_drift <= 1e-8 * (1 + np.linalg.norm(x))
    assert np.nanmax(tr.column("drift")) <= 1e-8 * (1 + np.linalg.norm(x))


def test_cfw_and_mp_are_always_good():
    inst = quadratic_simplex(0, d=20, kappa=4)
    tr = run(inst.objective, inst.dictionary, "CFW", SolverConfig(max_iters=200))
    assert tr.column("in_G").all()
    assert (tr.column("gamma_max") >= 1).all()
    inst = quadratic_span(0, d=10)
    tr = run(inst.objective, inst.dictionary, "MP", SolverConfig(max_iters=200))
    assert tr.column("in_G").all()
    assert np.isinf(tr.column("gamma_max")).all()


def test_make_subroutine():
    assert make_subroutine("PFW").name == "PFW"
    with pytest.raises(ValueError):
        make_subroutine("XYZ")
