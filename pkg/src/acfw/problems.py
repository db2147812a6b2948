"""Benchmark objectives with exact gradients and evaluation counters."""

from __future__ import annotations

import threading

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.special import expit


class Objective:
    """Smooth objective with instrumented evaluation counts.

    Subclasses implement either ``_value_and_gradient`` or the pair
    ``_value`` and ``_gradient``; each side defaults to the other. ``lipschitz`` is the global gradient Lipschitz
    constant when it is known in closed form, else ``None``.
    """

    lipschitz = None
    name = "objective"

    def __init__(self, dimension):
        self.dimension = int(dimension)
        self.n_value = 0
        self.n_gradient = 0
        self._lock = threading.Lock()

    def _count(self, values=0, gradients=0):
        with self._lock:
            self.n_value += values
            self.n_gradient += gradients

    def reset_counters(self):
        with self._lock:
            self.n_value = 0
            self.n_gradient = 0

    @property
    def counters(self):
        return self.n_value, self.n_gradient

    def value(self, x):
        self._count(values=1)
        return float(self._value(x))

    def gradient(self, x):
        self._count(gradients=1)
        return self._gradient(x)

    def value_and_gradient(self, x):
        self._count(values=1, gradients=1)
        f, g = self._value_and_gradient(x)
        return float(f), g

    def _value_and_gradient(self, x):
        return self._value(x), self._gradient(x)

    def _value(self, x):
        return self._value_and_gradient(x)[0]

    def _gradient(self, x):
        return self._value_and_gradient(x)[1]

    def __call__(self, x):
        # uncounted; for oracles and finite differences
        return float(self._value(x))


def eval_quadratic(Q, b, x):
    """``f = x'Qx/2 + b'x`` and its gradient. ``Q`` may be a 1-d diagonal."""
    Q = np.asarray(Q, dtype=float)
    x = np.asarray(x, dtype=float)
    qx = Q * x if Q.ndim == 1 else Q @ x
    return 0.5 * float(x @ qx) + float(b @ x), qx + b


class Quadratic(Objective):
    name = "quadratic"

    def __init__(self, Q, b, const=0.0, center=None):
        Q = np.asarray(Q, dtype=float)
        b = np.asarray(b, dtype=float)
        super().__init__(b.shape[0])
        # when set, values are computed as (x - c)'Q(x - c)/2, which keeps
        # full relative accuracy near the minimizer
        self.center = None if center is None else np.asarray(center, dtype=float)
        if Q.ndim == 2 and not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        self.Q = Q
        self.b = b
        self.const = float(const)
        eig = Q if Q.ndim == 1 else np.linalg.eigvalsh(Q)
        self.lipschitz = float(np.max(eig))
        self.mu = float(np.min(eig))

    @classmethod
    def centered(cls, Q, center):
        """``(x - c)'Q(x - c)/2`` written in ``x'Qx/2 + b'x + const`` form."""
        Q = np.asarray(Q, dtype=float)
        center = np.asarray(center, dtype=float)
        qc = Q * center if Q.ndim == 1 else Q @ center
        return cls(Q, -qc, 0.5 * float(center @ qc), center=center)

    def _value_and_gradient(self, x):
        if self.center is not None:
            return eval_quadratic(self.Q, np.zeros_like(self.b), np.asarray(x, dtype=float) - self.center)
        f, g = eval_quadratic(self.Q, self.b, x)
        return f + self.const, g

    def values(self, X):
        """Batched values for the rows of ``X`` (uncounted)."""
        X = np.atleast_2d(X)
        if self.center is not None:
            R = X - self.center
            QR = R * self.Q if self.Q.ndim == 1 else R @ self.Q
            return 0.5 * np.einsum("ij,ij->i", R, QR)
        QX = X * self.Q if self.Q.ndim == 1 else X @ self.Q
        return 0.5 * np.einsum("ij,ij->i", X, QX) + X @ self.b + self.const


def _log1pexp(y):
    # log(1 + e^y) without overflow
    out = np.empty_like(y)
    pos = y > 0
    out[pos] = y[pos] + np.log1p(np.exp(-y[pos]))
    out[~pos] = np.log1p(np.exp(y[~pos]))
    return out


def eval_logistic(design, labels, lam, x):
    """Mean logistic loss ``log(1 + e^y) - b y`` plus ``lam/2 ||x||^2``."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n = design.shape[0]
    y = np.asarray(design @ x).ravel()
    f = float(np.sum(_log1pexp(y) - labels * y)) / n + 0.5 * lam * float(x @ x)
    resid = expit(y) - labels
    g = np.asarray(design.T @ resid).ravel() / n + lam * x
    return f, g


class Logistic(Objective):
    name = "logistic"

    def __init__(self, design, labels, lam=0.0):
        if sparse.issparse(design):
            design = sparse.csr_matrix(design, dtype=float)
        else:
            design = np.asarray(design, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if design.shape[0] != labels.shape[0]:
            raise ValueError("design rows and labels disagree")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0/1")
        super().__init__(design.shape[1])
        self.design = design
        self.labels = labels
        self.lam = float(lam)
        n = design.shape[0]
        # sigma' <= 1/4, so L <= ||A||_2^2 / (4n) + lam
        if sparse.issparse(design):
            smax = splinalg.svds(design, k=1, return_singular_vectors=False)[0] \
                if min(design.shape) > 1 else splinalg.norm(design)
        else:
            smax = np.linalg.norm(design, 2)
        self.lipschitz = float(smax) ** 2 / (4.0 * n) + self.lam

    def _value_and_gradient(self, x):
        return eval_logistic(self.design, self.labels, self.lam, x)

    def _value(self, x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.design @ x).ravel()
        n = self.design.shape[0]
        return float(np.sum(_log1pexp(y) - self.labels * y)) / n + 0.5 * self.lam * float(x @ x)

    def _gradient(self, x):
        return self._value_and_gradient(x)[1]


def huber(a, delta):
    a = np.asarray(a, dtype=float)
    quad = np.abs(a) <= delta
    return np.where(quad, 0.5 * a * a, delta * (np.abs(a) - 0.5 * delta))


def huber_derivative(a, delta):
    a = np.asarray(a, dtype=float)
    # |a| == delta takes the quadratic branch; both agree there
    return np.where(np.abs(a) <= delta, a, delta * np.sign(a))


def eval_huber_completion(observed, shape, delta, X):
    """Mean Huber loss of the residuals ``A_ij - X_ij`` on observed entries."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    rows, cols, vals = _split_observed(observed)
    X = np.asarray(X, dtype=float).reshape(shape)
    resid = vals - X[rows, cols]
    m = len(vals)
    f = float(np.sum(huber(resid, delta))) / m
    G = np.zeros(shape)
    np.add.at(G, (rows, cols), -huber_derivative(resid, delta) / m)
    return f, G


def _split_observed(observed):
    # either (rows, cols, vals) arrays or an iterable of (i, j, value)
    if isinstance(observed, tuple) and len(observed) == 3 and all(
        isinstance(o, np.ndarray) for o in observed
    ):
        rows, cols, vals = observed
    else:
        arr = list(observed)
        rows = [o[0] for o in arr]
        cols = [o[1] for o in arr]
        vals = [o[2] for o in arr]
    return np.asarray(rows, dtype=int), np.asarray(cols, dtype=int), np.asarray(vals, dtype=float)


class HuberCompletion(Objective):
    """Huber matrix completion on a row-major flattened ``m x p`` variable."""

    name = "huber"

    def __init__(self, observed, shape, delta=1.0):
        self.shape = tuple(shape)
        super().__init__(self.shape[0] * self.shape[1])
        rows, cols, vals = _split_observed(observed)
        if rows.size == 0:
            raise ValueError("no observed entries")
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= self.shape[0] or cols.max() >= self.shape[1]:
            raise ValueError("observed index out of range")
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.observed = (rows, cols, vals)
        self.delta = float(delta)
        # residual map is a coordinate selection; each entry appears at most
        # count times, so L <= max multiplicity / |I|
        _, counts = np.unique(rows * self.shape[1] + cols, return_counts=True)
        self.lipschitz = float(counts.max()) / len(vals)

    def _value_and_gradient(self, x):
        f, G = eval_huber_completion(self.observed, self.shape, self.delta, x)
        return f, G.ravel()

    def _value(self, x):
        rows, cols, vals = self.observed
        X = np.asarray(x, dtype=float).reshape(self.shape)
        return float(np.sum(huber(vals - X[rows, cols], self.delta))) / len(vals)

    def _gradient(self, x):
        return self._value_and_gradient(x)[1]


def eval_dictionary_learning(A_data, p, z):
    """``||A - DX||_F^2 / (2n)`` over the flattened pair ``z = (vec D, vec X)``."""
    A_data = np.asarray(A_data, dtype=float)
    m, n = A_data.shape
    z = np.asarray(z, dtype=float)
    if z.shape[0] != m * p + p * n:
        raise ValueError("z has the wrong length")
    D = z[: m * p].reshape(m, p)
    X = z[m * p:].reshape(p, n)
    R = A_data - D @ X
    f = 0.5 * float(np.sum(R * R)) / n
    gD = -(R @ X.T) / n
    gX = -(D.T @ R) / n
    return f, np.concatenate([gD.ravel(), gX.ravel()])


class DictionaryLearning(Objective):
    name = "dictlearn"

    def __init__(self, A_data, p):
        self.A_data = np.asarray(A_data, dtype=float)
        self.m, self.n = self.A_data.shape
        self.p = int(p)
        super().__init__(self.m * self.p + self.p * self.n)

    def _value_and_gradient(self, x):
        return eval_dictionary_learning(self.A_data, self.p, x)

    def _value(self, x):
        D = x[: self.m * self.p].reshape(self.m, self.p)
        X = x[self.m * self.p:].reshape(self.p, self.n)
        R = self.A_data - D @ X
        return 0.5 * float(np.sum(R * R)) / self.n

    def _gradient(self, x):
        return self._value_and_gradient(x)[1]


def finite_diff_gradient(fun, x, h=1e-6):
    """Central-difference gradient of the scalar callable ``fun`` at ``x``."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
        e[i] = 0.0
    return out


def gradient_error(objective, x, hs=(1e-4, 1e-5, 1e-6)):
    """Best relative error between the analytic and finite-difference gradient.

    The error is ``||g - g_fd|| / max(||g||, ||g_fd||, 1e-12)``, minimized over
    the step sizes ``hs``; truncation and rounding pull in opposite
    directions, so no single ``h`` is reliable for every objective.
    """
    g = objective._gradient(x)
    best = np.inf
    for h in hs:
        fd = finite_diff_gradient(objective, x, h)
        denom = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        best = min(best, float(np.linalg.norm(g - fd) / denom))
    return best
