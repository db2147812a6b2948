"""Independent oracles and trace audits.

Nothing here calls the solvers: reference minimizers are computed by grid
enumeration, secular equations or projected gradient, and audits only read
a finished ``Trace``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import damping_factor

ANALYTIC, BRUTE_FORCE, USER = "analytic", "brute-force", "user-supplied"


@dataclass
class RateCertificate:
    """Problem constants used by the rate and cardinality checks.

    ``provenance`` maps a field name to how it was obtained; the Lipschitz
    ceiling check only runs when ``L`` is analytic.
    """

    L: float = None
    mu: float = None
    alpha_set: float = None
    g_floor: float = None
    w_A: float = None
    D_A: float = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("L", "mu", "alpha_set", "g_floor", "w_A", "D_A"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative")
        for key, src in self.provenance.items():
            if src not in (ANALYTIC, BRUTE_FORCE, USER):
                raise ValueError(f"unknown provenance {src!r} for {key}")

    @classmethod
    def for_quadratic(cls, objective, dictionary=None):
        prov = {"L": ANALYTIC, "mu": ANALYTIC}
        D = None
        if dictionary is not None:
            D = dictionary.diameter
            prov["D_A"] = ANALYTIC
        return cls(L=objective.lipschitz, mu=max(objective.mu, 0.0), D_A=D, provenance=prov)


# --- reference minimizers -------------------------------------------------

def barycentric_grid(n_atoms, k):
    """All weight vectors with entries in ``{0, 1/k, ..., 1}`` summing to one."""
    rows = []
    for cut in itertools.combinations(range(k + n_atoms - 1), n_atoms - 1):
        bounds = (-1,) + cut + (k + n_atoms - 1,)
        rows.append([bounds[i + 1] - bounds[i] - 1 for i in range(n_atoms)])
    return np.asarray(rows, dtype=float) / k


def grid_error_bound(L, D, k):
    return L * D * D / (2.0 * k * k)


def _values(objective, X):
    if hasattr(objective, "values"):
        return np.asarray(objective.values(X), dtype=float)
    return np.array([objective(x) for x in X])


def brute_force_reference(objective, atoms, grid_k=200, return_point=False):
    """Minimum of ``objective`` over ``conv(atoms)`` by grid enumeration.

    The best grid point is refined by one pass of bounded scalar searches
    along every edge direction ``e_i - e_j`` of the weight simplex.
    """
    atoms = np.asarray(atoms, dtype=float)
    n = atoms.shape[0]
    if not 1 <= n <= 4:
        raise ValueError("brute force supports 1 to 4 atoms")
    if not 1 <= grid_k <= 200:
        raise ValueError("grid_k must lie in [1, 200]")
    W = barycentric_grid(n, grid_k)
    vals = _values(objective, W @ atoms)
    best = int(np.argmin(vals))
    w = W[best].copy()
    fbest = float(vals[best])
    for i, j in itertools.permutations(range(n), 2):
        if i > j:
            continue
        lo, hi = -w[i], w[j]
        if hi - lo <= 0:
            continue
        e = np.zeros(n)
        e[i], e[j] = 1.0, -1.0
        res = optimize.minimize_scalar(
            lambda s: objective((w + s * e) @ atoms), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        if res.fun < fbest:
            fbest = float(res.fun)
            w = np.clip(w + res.x * e, 0.0, None)
            w /= w.sum()
    if return_point:
        return fbest, w @ atoms
    return fbest


def quadratic_unconstrained_min(Q, b, const=0.0):
    x = np.linalg.solve(Q, -b)
    return 0.5 * float(x @ Q @ x) + float(b @ x) + const, x


def quadratic_l2ball_min(Q, b, beta, const=0.0, center=None):
    """Trust-region subproblem ``min x'Qx/2 + b'x`` s.t. ``||x|| <= beta`` (Q SPD).

    Solved through the secular equation ``||(Q + lam I)^{-1} b|| = beta``.
    With ``center`` given (``b = -Qc``) the optimal value is accumulated in
    the centered form ``sum ev lam^2 c_i^2 / (ev + lam)^2 / 2``, which keeps
    relative accuracy when the minimum is close to zero.
    """
    ev, U = np.linalg.eigh(Q)
    if ev.min() <= 0:
        raise ValueError("Q must be positive definite")
    bt = U.T @ b

    def norm_at(lam):
        return float(np.linalg.norm(bt / (ev + lam)))

    if norm_at(0.0) <= beta:
        lam = 0.0
    else:
        hi = 1.0
        while norm_at(hi) > beta:
            hi *= 2.0
        lam = optimize.brentq(lambda s: norm_at(s) - beta, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    x = U @ (-bt / (ev + lam))
    if center is not None:
        ct = U.T @ np.asarray(center, dtype=float)
        return 0.5 * float(np.sum(ev * (lam * ct / (ev + lam)) ** 2)), x
    return 0.5 * float(x @ Q @ x) + float(b @ x) + const, x


def project_simplex(y):
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - (css - 1.0) / k > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def quadratic_simplex_min(Q, b, const=0.0, iters=20000):
    """Simplex-constrained QP by accelerated projected gradient, then a KKT polish.

    The polish solves the equality-constrained system on the detected
    support exactly, and is kept only if it is feasible and no worse.
    """
    Q = np.asarray(Q, dtype=float)
    n = b.size
    L = float(np.linalg.eigvalsh(Q).max())
    x = np.full(n, 1.0 / n)
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = project_simplex(y - (Q @ y + b) / L)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new

    def fval(z):
        return 0.5 * float(z @ Q @ z) + float(b @ z) + const

    best_x, best_f = x, fval(x)
    S = np.nonzero(x > 1e-10)[0]
    k = S.size
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Q[np.ix_(S, S)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([-b[S], [1.0]])
    try:
        sol = np.linalg.solve(K, rhs)
        z = np.zeros(n)
        z[S] = sol[:k]
        if z.min() >= 0 and fval(z) <= best_f:
            best_x, best_f = z, fval(z)
    except np.linalg.LinAlgError:
        pass
    return best_f, best_x


# --- rate fitting ---------------------------------------------------------

@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    n: int


def fit_slope(t, values, model="loglog"):
    t = np.asarray(t, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    if model == "loglog":
        if np.any(t <= 0):
            raise ValueError("loglog fits need t >= 1")
        x = np.log(t)
    elif model == "semilog":
        x = t
    else:
        raise ValueError(f"unknown model {model!r}")
    if x.size < 2:
        raise ValueError("need at least two points to fit a slope")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, int(x.size))


def rate_slope(trace, metric="gap", window=None, model="loglog", f_star=None):
    """Least-squares slope of ``log(metric)`` against ``log t`` or ``t``.

    ``metric`` is ``"gap"`` (the FW gap column) or ``"f_gap"`` (``f - f_star``).
    ``window`` is an inclusive ``(t_lo, t_hi)``; points outside the recorded
    range are ignored.
    """
    t = trace.column("t")
    if metric == "gap":
        vals = trace.column("gap")
    elif metric == "f_gap":
        if f_star is None:
            raise ValueError("f_gap needs f_star")
        vals = trace.column("f") - f_star
    else:
        raise ValueError(f"unknown metric {metric!r}")
    mask = np.ones(t.size, dtype=bool)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if not mask.any():
        raise ValueError("window does not intersect the trace")
    if np.any(vals[mask] <= 0):
        raise ValueError("metric must be positive on the window")
    return fit_slope(t[mask], vals[mask], model)


# --- trace audit ----------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False

    def line(self):
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return f"[{status}] {self.name}: {self.detail}"


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks if not c.skipped)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format(self):
        return "\n".join(c.line() for c in self.checks)


def _log_eta(x, eta):
    return math.log(x) / math.log(eta)


def _good_base(subroutine, t, n_atoms):
    if subroutine in ("CFW", "MP"):
        return t + 1.0
    if subroutine == "AFW":
        return (t + 1.0) / 2.0
    if subroutine == "PFW":
        if n_atoms is None:
            return 0.0
        # (t + 1) / (3 |A|! + 1), vanishing once |A|! overflows
        log_fact = math.lgamma(n_atoms + 1)
        if log_fact > 700:
            return 0.0
        return (t + 1.0) / (3.0 * math.exp(log_fact) + 1.0)
    raise ValueError(f"unknown subroutine {subroutine!r}")


def audit_trace(trace, certificate=None, eta=None, subroutine=None, n_atoms=None,
                method=None, delta=None, slack=1):
    """Check a trace against the invariants of the auto-conditioned method.

    Checks: monotone objective, ``L_t <= L``, the count of non-significant
    iterations, one-step descent on significant accepted iterations, the
    good-iteration lower bound of the subroutine, and one objective value
    per iteration. ``slack`` extra indices are allowed in both cardinality
    bounds. Checks needing data the trace or certificate lacks are skipped.
    """
    recs = trace.records
    eta = eta if eta is not None else trace.eta
    subroutine = subroutine or trace.subroutine
    method = method or trace.method
    delta = delta if delta is not None else trace.delta
    report = AuditReport()
    if not recs:
        report.checks.append(CheckResult("non-empty", False, "trace has no records"))
        return report
    T = len(recs)
    f = np.array([r.f for r in recs])
    L_t = np.array([r.L_t for r in recs])
    L_next = np.array([r.L_next for r in recs], dtype=float)
    # CSV traces lack L_next; it is the next record's L_t
    missing = np.isnan(L_next)
    L_next[:-1][missing[:-1]] = L_t[1:][missing[:-1]]
    known = ~np.isnan(L_next)
    in_I = np.where(known, L_next <= eta * L_t, np.array([r.in_I_eta for r in recs]))
    in_G = np.array([r.in_G for r in recs])
    accepted = np.array([r.accepted for r in recs])
    L0 = trace.L0 if not math.isnan(trace.L0) else L_t[0]

    # monotone objective
    if method == "AC":
        seq = f if math.isnan(trace.final_f) else np.append(f, trace.final_f)
        bad = np.nonzero(np.diff(seq) > 0)[0]
        report.checks.append(CheckResult(
            "monotone_f", bad.size == 0,
            "f nonincreasing" if bad.size == 0 else f"f increases at t={int(bad[0]) + 1}"))
    else:
        report.checks.append(CheckResult("monotone_f", True, f"not required for method {method}", skipped=True))

    L = certificate.L if certificate is not None else None
    analytic = L is not None and certificate.provenance.get("L") == ANALYTIC
    # backtracking may overshoot L by design; the ceiling is a property of AC
    if analytic and method == "AC":
        top = float(np.nanmax(np.concatenate([L_t, L_next[known]])))
        ok = top <= L + 1e-9
        report.checks.append(CheckResult("lipschitz_ceiling", ok, f"max L_t={top:.12g}, L={L:.12g}"))
    else:
        report.checks.append(CheckResult("lipschitz_ceiling", True, "needs an analytic L and an AC trace", skipped=True))

    # running damping product up to each t
    r_cum = np.array([r.r_cum for r in recs], dtype=float)
    if np.any(np.isnan(r_cum)):
        r_cum = np.cumprod([damping_factor(r.t, delta) for r in recs])

    if L is not None and method == "AC":
        K = np.floor([_log_eta(L / (r_cum[i] * L0), eta) for i in range(T)])
        bad_count = np.cumsum(~in_I)
        viol = np.nonzero(bad_count > K + slack)[0]
        report.checks.append(CheckResult(
            "bad_iterations", viol.size == 0,
            f"|I_eta^c| = {int(bad_count[-1])}, bound {int(K[-1])} + {slack}"
            + ("" if viol.size == 0 else f"; violated at t={int(viol[0])}")))
        base = np.array([_good_base(subroutine, i, n_atoms) for i in range(T)])
        good = np.cumsum(in_G & in_I)
        viol = np.nonzero(good < base - K - slack)[0]
        report.checks.append(CheckResult(
            "good_iterations", viol.size == 0,
            f"|G & I_eta| = {int(good[-1])} over {T} iterations ({subroutine})"
            + ("" if viol.size == 0 else f"; violated at t={int(viol[0])}")))
    else:
        report.checks.append(CheckResult("bad_iterations", True, "needs L and an AC trace", skipped=True))
        report.checks.append(CheckResult("good_iterations", True, "needs L and an AC trace", skipped=True))

    gd = np.array([r.grad_dot_d for r in recs], dtype=float)
    f_trial = np.array([r.f_trial for r in recs], dtype=float)
    if method == "AC" and not np.all(np.isnan(gd)):
        gamma = np.array([r.gamma for r in recs])
        sel = in_I & accepted & ~np.isnan(gd)
        rhs = f - (1.0 - eta / 2.0) * gamma * gd + 1e-12
        viol = np.nonzero(sel & (f_trial > rhs))[0]
        report.checks.append(CheckResult(
            "descent", viol.size == 0,
            f"{int(sel.sum())} significant accepted iterations checked"
            + ("" if viol.size == 0 else f"; violated at t={int(viol[0])}")))
    else:
        report.checks.append(CheckResult("descent", True, "needs grad_dot_d and an AC trace", skipped=True))

    if method == "AC":
        n_f = np.array([r.n_f for r in recs])
        steps = np.diff(np.concatenate([[2], n_f]))
        viol = np.nonzero(steps != 1)[0]
        report.checks.append(CheckResult(
            "eval_discipline", viol.size == 0,
            "one objective value per iteration" if viol.size == 0
            else f"{int(steps[viol[0]])} values at t={int(viol[0])}"))
    else:
        report.checks.append(CheckResult("eval_discipline", True, f"not required for method {method}", skipped=True))
    return report


# --- directional width ----------------------------------------------------

def _signed_basis_width(atoms):
    """Closed form for ``{+-e_i : i in S}``: ``1/sqrt(|S|)``; ``None`` otherwise."""
    nz = np.count_nonzero(atoms, axis=1)
    if np.any(nz != 1):
        return None
    idx = np.argmax(np.abs(atoms), axis=1)
    val = atoms[np.arange(len(atoms)), idx]
    if not np.allclose(np.abs(val), 1.0):
        return None
    coords = set(idx.tolist())
    for i in coords:
        signs = set(np.sign(val[idx == i]).tolist())
        if signs != {1.0, -1.0}:
            return None
    return 1.0 / math.sqrt(len(coords))


def l2ball_gradient_floor(mu, center_norm, beta):
    """Lower bound on ``||Q(x - c)||`` over ``||x|| <= beta``: ``mu (||c|| - beta)``."""
    return max(mu * (center_norm - beta), 0.0)


def min_directional_width(atoms, n_samples=100_000, seed=0, exact=True):
    """``min_{d in lin(A), |d| = 1} max_{z in A} z'd`` for a finite symmetric set.

    Returns ``(value, band)``. Sampling evaluates ``n_samples`` seeded unit
    directions in an orthonormal basis of ``lin(A)``, then refines the best
    few with Nelder-Mead; ``band`` is the improvement the refinement found,
    a rough indicator of how far sampling alone was from the minimum.
    """
    atoms = np.asarray(atoms, dtype=float)
    if exact:
        closed = _signed_basis_width(atoms)
        if closed is not None:
            return closed, 0.0
    _, s, Vt = np.linalg.svd(atoms, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    B = Vt[:rank].T
    if rank > 6:
        raise ValueError("sampling oracle supports spans of dimension <= 6")
    P = atoms @ B
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_samples, rank))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    widths = (U @ P.T).max(axis=1)
    order = np.argsort(widths)[:5]
    sampled = float(widths[order[0]])

    def h(u):
        nrm = np.linalg.norm(u)
        return float((P @ (u / nrm)).max()) if nrm > 0 else np.inf

    best = sampled
    for k in order:
        res = optimize.minimize(h, U[k], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best, sampled - best
