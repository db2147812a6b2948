"""Seeded synthetic problem instances.

Every generator is a pure function of ``(seed, sizes)`` and returns a
``ProblemInstance`` pairing an objective with its feasible domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..atoms import DictLearnDomain, L1Ball, L2Ball, NuclearBall, signed_basis_span, simplex
from ..problems import DictionaryLearning, HuberCompletion, Logistic, Quadratic


@dataclass
class ProblemInstance:
    kind: str
    objective: object
    dictionary: object
    convex: bool = True
    data: dict = field(default_factory=dict)


def _rng(seed):
    return np.random.default_rng(seed)


def random_spd(rng, d, kappa=1.0, L=1.0):
    """Rotated SPD matrix with spectrum geometrically spaced in ``[L/kappa, L]``."""
    if kappa == 1.0:
        return L * np.eye(d)
    ev = L * np.geomspace(1.0 / kappa, 1.0, d)
    U, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Q = (U * ev) @ U.T
    return 0.5 * (Q + Q.T)


def quadratic_simplex(seed=0, d=50, kappa=1.0, concentration=20.0, outside=False):
    """``(x - c)'Q(x - c)/2`` over the probability simplex.

    By default ``c`` is a Dirichlet draw, so the minimizer is interior;
    ``outside=True`` instead draws ``c`` from a Gaussian, which puts the
    constrained minimizer on a face.
    """
    rng = _rng(seed)
    Q = random_spd(rng, d, kappa)
    if outside:
        c = rng.standard_normal(d) / np.sqrt(d)
    else:
        c = rng.dirichlet(np.full(d, concentration))
    return ProblemInstance("quadratic-simplex", Quadratic.centered(Q, c), simplex(d),
                           data={"Q": Q, "center": c})


def quadratic_l2ball(seed=0, d=50, kappa=4.0, beta=1.0, center_norm=2.0):
    """Strongly convex quadratic whose unconstrained minimizer lies outside the ball."""
    rng = _rng(seed)
    Q = random_spd(rng, d, kappa)
    c = rng.standard_normal(d)
    c *= center_norm * beta / np.linalg.norm(c)
    return ProblemInstance("quadratic-l2ball", Quadratic.centered(Q, c), L2Ball(d, beta),
                           data={"Q": Q, "center": c, "beta": beta})


def quadratic_span(seed=0, d=20, kappa=4.0):
    """Strongly convex quadratic over ``lin{+-e_i}`` (unconstrained)."""
    rng = _rng(seed)
    Q = random_spd(rng, d, kappa)
    c = rng.standard_normal(d)
    return ProblemInstance("quadratic-span", Quadratic.centered(Q, c), signed_basis_span(d),
                           data={"Q": Q, "center": c})


def logistic_design(seed=0, n=200, d=50, density=1.0, feature_scale=3.0):
    """Gaussian design with labels from a sparse logistic model.

    Labels are drawn from the unscaled features; the returned design is
    multiplied by ``feature_scale``. At the default scale the l2-regularized
    minimizer (lambda = 0.01) has l1 norm well below 10, so the l1-ball
    constraint is inactive at the solution.
    """
    rng = _rng(seed)
    Z = sparse.random(n, d, density=density, format="csr", random_state=rng,
                      data_rvs=rng.standard_normal)
    w = np.zeros(d)
    support = rng.choice(d, size=max(1, d // 10), replace=False)
    w[support] = rng.standard_normal(support.size)
    p = 1.0 / (1.0 + np.exp(-(Z @ w)))
    labels = (rng.uniform(size=n) < p).astype(float)
    return (Z * feature_scale).tocsr(), labels


def logistic_l1(seed=0, n=200, d=50, lam=0.01, beta=10.0, design=None):
    if design is None:
        A, labels = logistic_design(seed, n, d)
    else:
        A, labels = design
    obj = Logistic(A, labels, lam)
    return ProblemInstance("logistic-l1", obj, L1Ball(obj.dimension, beta))


def logistic_span(seed=0, n=200, d=50, lam=0.01, design=None):
    if design is None:
        A, labels = logistic_design(seed, n, d)
    else:
        A, labels = design
    obj = Logistic(A, labels, lam)
    return ProblemInstance("logistic-span", obj, signed_basis_span(obj.dimension))


def huber_nuclear(seed=0, m=30, p=20, rank=3, frac=0.3, delta=1.0, beta=None, outlier_frac=0.05):
    """Low-rank matrix observed on a random subset, with sparse gross outliers."""
    rng = _rng(seed)
    M = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, p))
    k = max(1, int(round(frac * m * p)))
    flat = rng.choice(m * p, size=k, replace=False)
    rows, cols = np.divmod(flat, p)
    vals = M[rows, cols].copy()
    bad = rng.uniform(size=k) < outlier_frac
    vals[bad] += rng.standard_normal(bad.sum()) * 10.0
    if beta is None:
        beta = float(np.linalg.svd(M, compute_uv=False).sum())
    obj = HuberCompletion((rows, cols, vals), (m, p), delta)
    return ProblemInstance("huber-nuclear", obj, NuclearBall((m, p), beta, seed=seed),
                           data={"M": M})


def dictlearn_data(seed=0, m=40, n=80, p=16, l=5):
    """``A = B C`` with unit-column Gaussian ``B`` and ``C = U V' / (||U||_2 ||V||_2)``."""
    rng = _rng(seed)
    B = rng.standard_normal((m, p))
    B /= np.linalg.norm(B, axis=0)
    U = rng.standard_normal((p, l))
    V = rng.standard_normal((n, l))
    C = U @ V.T / (np.linalg.norm(U, 2) * np.linalg.norm(V, 2))
    return B @ C, B, C


def dictlearn(seed=0, m=40, n=80, p=16, l=5, beta=5.0, full_scale=False):
    if full_scale:
        m, n, p, l = 500, 1000, 200, 50
    A, B, C = dictlearn_data(seed, m, n, p, l)
    return ProblemInstance("dictlearn", DictionaryLearning(A, p), DictLearnDomain(m, p, n, beta),
                           convex=False, data={"A": A, "B": B, "C": C})


GENERATORS = {
    "quadratic-simplex": quadratic_simplex,
    "quadratic-l2ball": quadratic_l2ball,
    "quadratic-span": quadratic_span,
    "logistic-l1": logistic_l1,
    "logistic-span": logistic_span,
    "huber-nuclear": huber_nuclear,
    "dictlearn": dictlearn,
}


def gen_synthetic(kind, seed=0, **sizes):
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown problem kind {kind!r}") from None
    for k, v in sizes.items():
        if isinstance(v, (int, float)) and not isinstance(v, bool) and k in ("d", "n", "m", "p", "l", "rank") and v <= 0:
            raise ValueError(f"size {k} must be positive")
    return gen(seed=seed, **sizes)
