"""Atomic domains and their linear minimization oracles.

Every domain is a ``Dictionary``: it knows whether the feasible set is the
convex hull or the linear span of its atoms, exposes an LMO returning
``(atom_id, atom_vector)``, and a diameter bound. Matrix-valued domains work
on row-major flattened vectors so the solvers only ever see 1-d arrays.
"""

from __future__ import annotations

import itertools

import numpy as np

HULL = "convex-hull"
SPAN = "linear-span"


class LMOError(RuntimeError):
    """Raised when an oracle cannot produce a minimizer."""


class PowerIterationError(LMOError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


def lmo_finite(grad, atoms):
    """Exact argmin of ``grad @ a`` over the rows of ``atoms``.

    ``np.argmin`` returns the first minimizer, which gives the lowest-index
    tie-break.
    """
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[0] == 0:
        raise LMOError("lmo_finite needs a non-empty 2-d atom array")
    idx = int(np.argmin(atoms @ grad))
    return idx, atoms[idx].copy()


def lmo_l1_ball(grad, beta):
    """LMO of the l1 ball of radius ``beta``.

    Atoms are enumerated as ``+beta e_0, -beta e_0, +beta e_1, ...`` so the
    id of ``+beta e_i`` is ``2i`` and of ``-beta e_i`` is ``2i + 1``.
    """
    grad = np.asarray(grad, dtype=float)
    out = np.zeros_like(grad)
    i = int(np.argmax(np.abs(grad)))
    if grad[i] > 0:
        out[i] = -beta
        return 2 * i + 1, out
    # grad[i] < 0, or grad == 0 -> canonical +beta e_0
    out[i] = beta
    return 2 * i, out


def lmo_l2_ball(grad, beta):
    grad = np.asarray(grad, dtype=float)
    nrm = np.linalg.norm(grad)
    if nrm == 0.0:
        out = np.zeros_like(grad)
        out[0] = beta
        return out
    return -beta * grad / nrm


def top_singular_pair(mat, tol=1e-10, max_iters=10000, seed=0):
    """Leading singular triple of ``mat`` by power iteration on ``mat.T @ mat``.

    Stops when ``||M^T M v - s^2 v|| <= tol * s^2``. One restart from a
    fresh seed is attempted if the first run stagnates.
    """
    mat = np.asarray(mat, dtype=float)
    residual = np.inf
    for attempt in range(2):
        rng = np.random.default_rng((seed, attempt))
        v = rng.standard_normal(mat.shape[1])
        v /= np.linalg.norm(v)
        for _ in range(max_iters):
            mv = mat @ v
            w = mat.T @ mv
            s2 = float(mv @ mv)
            if s2 == 0.0:
                # v landed in the null space; restart
                break
            residual = np.linalg.norm(w - s2 * v) / s2
            v = w / np.linalg.norm(w)
            if residual <= tol:
                mv = mat @ v
                sigma = np.linalg.norm(mv)
                return mv / sigma, sigma, v
    raise PowerIterationError("power iteration did not converge", residual)


def lmo_nuclear_ball(grad, beta, pi_tol=1e-10, pi_max_iters=10000, seed=0):
    """Rank-one LMO of the nuclear-norm ball: ``-beta u1 v1^T``."""
    grad = np.asarray(grad, dtype=float)
    if not np.any(grad):
        out = np.zeros_like(grad)
        out[0, 0] = beta
        return out
    u, _, v = top_singular_pair(grad, tol=pi_tol, max_iters=pi_max_iters, seed=seed)
    return -beta * np.outer(u, v)


def symmetrize(atoms):
    """Return ``A`` union ``-A`` with duplicates removed, original atoms first."""
    atoms = np.asarray(atoms, dtype=float)
    out = []
    seen = set()
    for a in itertools.chain(atoms, -atoms):
        key = tuple(np.round(a, 12) + 0.0)
        if key in seen:
            continue
        seen.add(key)
        out.append(a)
    return np.array(out)


def pairwise_diameter(atoms):
    """Exact maximum pairwise distance, O(n^2) scan."""
    atoms = np.asarray(atoms, dtype=float)
    best = 0.0
    sq = np.einsum("ij,ij->i", atoms, atoms)
    for i in range(len(atoms)):
        d2 = sq[i] + sq[i + 1:] - 2.0 * atoms[i + 1:] @ atoms[i]
        if d2.size:
            best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))


class Dictionary:
    """Base class for atomic domains.

    Subclasses set ``kind``, ``dim``, ``diameter`` and ``symmetric`` and
    implement ``lmo``. Finite ones also implement ``atom`` and ``atoms``.
    """

    kind = HULL
    symmetric = False
    finite = False

    def lmo(self, grad):
        raise NotImplementedError

    def atom(self, atom_id):
        raise NotImplementedError(f"{type(self).__name__} cannot look up atoms by id")

    @property
    def atoms(self):
        raise NotImplementedError(f"{type(self).__name__} is not enumerable")

    @property
    def n_atoms(self):
        return len(self.atoms)

    def initial_atom(self, seed=0):
        """The starting atom: first enumerated atom, else LMO of a seeded direction."""
        if self.finite:
            return 0, self.atom(0)
        rng = np.random.default_rng(seed)
        return self.lmo(rng.standard_normal(self.dim))


class FiniteDictionary(Dictionary):
    finite = True

    def __init__(self, atoms, kind=HULL):
        atoms = np.array(atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise ValueError("atoms must be a non-empty 2-d array")
        if kind not in (HULL, SPAN):
            raise ValueError(f"unknown dictionary kind {kind!r}")
        atoms.setflags(write=False)
        self._atoms = atoms
        self.kind = kind
        self.dim = atoms.shape[1]
        self.diameter = pairwise_diameter(atoms)
        self.symmetric = _is_symmetric(atoms)

    @property
    def atoms(self):
        return self._atoms

    def atom(self, atom_id):
        return self._atoms[atom_id].copy()

    def lmo(self, grad):
        return lmo_finite(grad, self._atoms)


def _is_symmetric(atoms):
    keys = {tuple(np.round(a, 12) + 0.0) for a in atoms}
    return all(tuple(np.round(-a, 12) + 0.0) in keys for a in atoms)


def simplex(dim):
    """Probability simplex as the hull of the standard basis."""
    return FiniteDictionary(np.eye(dim))


def signed_basis_span(dim, scale=1.0):
    """``lin{+-scale e_i}``, the whole space, as a symmetric span dictionary."""
    return FiniteDictionary(symmetrize(scale * np.eye(dim)), kind=SPAN)


class L1Ball(Dictionary):
    finite = True
    symmetric = True

    def __init__(self, dim, beta=1.0, kind=HULL):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.dim = dim
        self.beta = float(beta)
        self.kind = kind
        self.diameter = 2.0 * self.beta

    def lmo(self, grad):
        return lmo_l1_ball(grad, self.beta)

    def atom(self, atom_id):
        out = np.zeros(self.dim)
        i, neg = divmod(atom_id, 2)
        out[i] = -self.beta if neg else self.beta
        return out

    @property
    def atoms(self):
        out = np.zeros((2 * self.dim, self.dim))
        idx = np.arange(self.dim)
        out[2 * idx, idx] = self.beta
        out[2 * idx + 1, idx] = -self.beta
        return out

    @property
    def n_atoms(self):
        return 2 * self.dim


class L2Ball(Dictionary):
    """Euclidean ball; atoms are its boundary sphere. Not enumerable."""

    def __init__(self, dim, beta=1.0):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.dim = dim
        self.beta = float(beta)
        self.diameter = 2.0 * self.beta
        self.symmetric = True

    def lmo(self, grad):
        return None, lmo_l2_ball(grad, self.beta)


class NuclearBall(Dictionary):
    """Nuclear-norm ball of ``shape`` matrices, flattened row-major."""

    def __init__(self, shape, beta=1.0, pi_tol=1e-10, pi_max_iters=10000, seed=0):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.shape = tuple(shape)
        self.dim = self.shape[0] * self.shape[1]
        self.beta = float(beta)
        self.pi_tol = pi_tol
        self.pi_max_iters = pi_max_iters
        self.seed = seed
        self.diameter = 2.0 * self.beta
        self.symmetric = True

    def lmo(self, grad):
        mat = np.asarray(grad, dtype=float).reshape(self.shape)
        out = lmo_nuclear_ball(mat, self.beta, self.pi_tol, self.pi_max_iters, self.seed)
        return None, out.ravel()


def lmo_product(grads, blocks):
    """Blockwise LMO; a linear objective separates over a product domain."""
    if len(grads) != len(blocks):
        raise ValueError("need one gradient block per dictionary block")
    return [blk.lmo(g) for g, blk in zip(grads, blocks)]


class ProductDictionary(Dictionary):
    """Cartesian product of convex-hull blocks.

    ``index[k]`` lists the positions of block ``k`` inside the flat vector;
    by default blocks are laid out contiguously.
    """

    def __init__(self, blocks, index=None):
        self.blocks = list(blocks)
        if not self.blocks:
            raise ValueError("empty product")
        if any(b.kind != HULL for b in self.blocks):
            raise ValueError("product domains combine convex-hull blocks only")
        if index is None:
            offsets = np.cumsum([0] + [b.dim for b in self.blocks])
            index = [np.arange(offsets[k], offsets[k + 1]) for k in range(len(self.blocks))]
        self.index = [np.asarray(ix, dtype=int) for ix in index]
        self.dim = int(sum(len(ix) for ix in self.index))
        self.diameter = float(np.sqrt(sum(b.diameter ** 2 for b in self.blocks)))
        self.symmetric = all(b.symmetric for b in self.blocks)

    def lmo(self, grad):
        grad = np.asarray(grad, dtype=float)
        out = np.empty(self.dim)
        picks = lmo_product([grad[ix] for ix in self.index], self.blocks)
        for ix, (_, atom) in zip(self.index, picks):
            out[ix] = atom
        return tuple(p[0] for p in picks), out


class DictLearnDomain(Dictionary):
    """``{||d_j||_2 <= 1} x {||x_i||_1 <= beta}`` for ``z = (vec D, vec X)``.

    Vectorized product of ``p`` l2 balls (columns of the m-by-p ``D``) and
    ``n`` l1 balls (columns of the p-by-n ``X``), both row-major.
    """

    def __init__(self, m, p, n, beta):
        self.m, self.p, self.n = m, p, n
        self.beta = float(beta)
        self.dim = m * p + p * n
        self.diameter = float(np.sqrt(4.0 * p + 4.0 * n * self.beta ** 2))
        self.symmetric = True

    def split(self, z):
        k = self.m * self.p
        return z[:k].reshape(self.m, self.p), z[k:].reshape(self.p, self.n)

    def lmo(self, grad):
        g_d, g_x = self.split(np.asarray(grad, dtype=float))
        norms = np.linalg.norm(g_d, axis=0)
        safe = np.where(norms > 0, norms, 1.0)
        atom_d = -g_d / safe
        # zero column -> canonical +e_0
        zero = norms == 0
        atom_d[:, zero] = 0.0
        atom_d[0, zero] = 1.0

        rows = np.argmax(np.abs(g_x), axis=0)
        cols = np.arange(self.n)
        picked = g_x[rows, cols]
        atom_x = np.zeros_like(g_x)
        atom_x[rows, cols] = np.where(picked > 0, -self.beta, self.beta)
        return None, np.concatenate([atom_d.ravel(), atom_x.ravel()])

    def as_product(self):
        """The same domain as a generic ``ProductDictionary`` (slow; for checks)."""
        flat = np.arange(self.dim)
        d_idx, x_idx = self.split(flat)
        blocks = [L2Ball(self.m, 1.0) for _ in range(self.p)]
        blocks += [L1Ball(self.p, self.beta) for _ in range(self.n)]
        index = [d_idx[:, j] for j in range(self.p)] + [x_idx[:, i] for i in range(self.n)]
        return ProductDictionary(blocks, index)


def random_feasible_point(dictionary, rng, n_atoms=5):
    """Random convex combination of LMO answers to Gaussian directions.

    Feasible for any convex-hull dictionary; for a span the combination is
    rescaled by a random factor so points are not confined to the hull.
    """
    dim = dictionary.dim
    w = rng.dirichlet(np.ones(n_atoms))
    x = np.zeros(dim)
    for wi in w:
        x += wi * dictionary.lmo(rng.standard_normal(dim))[1]
    if dictionary.kind == SPAN:
        x *= rng.uniform(0.5, 3.0)
    return x
