"""Dense convex quadratic programming with certified KKT residuals.

Solves

    minimize    0.5 x'Qx + c'x
    subject to  A_eq x = b_eq                      (multipliers nu)
                A_ineq x <= b_ineq                 (multipliers mu >= 0)
                lower <= x <= upper                (optional boxes)
                sum_k w_k x_k^2 + g'x <= h         (convex diagonal-quadratic rows)

with a primal-dual interior point method (Mehrotra predictor-corrector on a
dense reduced KKT system), followed by an active-set Newton polish.  Multiplier
sign convention: stationarity is  Qx + c - A_eq' nu + J(x)' mu = 0  where J
stacks the gradients of all inequality rows.

Solutions report re-evaluable residuals; `kkt_residuals` recomputes them from
scratch so callers can certify a solution independently of the solve path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-8
_MAX_ITERATIONS = 200
_DIVERGENCE_CAP = 1e12
_FEAS_TOL = 1e-7          # phase-1 verdict threshold on the elastic violation


class QpStructureError(ValueError):
    """Inconsistent dimensions, a non-PSD objective, or malformed rows."""


@dataclass(frozen=True)
class QuadRow:
    """Convex inequality  sum_k coef[k] * x[idx[k]]**2 + lin @ x <= rhs.

    coef must be nonnegative (the row is convex).  lin is a dense length-n
    vector; idx/coef carry only the curved variables.
    """

    idx: np.ndarray
    coef: np.ndarray
    lin: np.ndarray
    rhs: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "idx", np.asarray(self.idx, dtype=int))
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float))
        object.__setattr__(self, "lin", np.asarray(self.lin, dtype=float))
        if self.idx.shape != self.coef.shape or self.idx.ndim != 1:
            raise QpStructureError("quad row idx/coef must be matching 1-d arrays")
        if np.any(self.coef < 0):
            raise QpStructureError("quad row curvature coefficients must be >= 0")

    def value(self, x: np.ndarray) -> float:
        return float(np.dot(self.coef, x[self.idx] ** 2) + self.lin @ x - self.rhs)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = self.lin.copy()
        np.add.at(g, self.idx, 2.0 * self.coef * x[self.idx])
        return g

    def curvature_diag(self, n: int) -> np.ndarray:
        h = np.zeros(n)
        np.add.at(h, self.idx, 2.0 * self.coef)
        return h


@dataclass(frozen=True)
class QuadraticProgram:
    q: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ineq: np.ndarray
    b_ineq: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    quad_rows: tuple[QuadRow, ...] = ()

    def __post_init__(self) -> None:
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        if q.shape != (n, n):
            raise QpStructureError(f"Q must be {n}x{n}, got {q.shape}")
        if np.max(np.abs(q - q.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(q), initial=0.0)):
            raise QpStructureError("Q must be symmetric")
        q = 0.5 * (q + q.T)
        _check_psd(q)
        a_eq = _as_matrix(self.a_eq, n, "a_eq")
        b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        if a_eq.shape[0] != b_eq.size:
            raise QpStructureError("a_eq/b_eq row counts differ")
        a_ineq = _as_matrix(self.a_ineq, n, "a_ineq")
        b_ineq = np.asarray(self.b_ineq, dtype=float).ravel()
        if a_ineq.shape[0] != b_ineq.size:
            raise QpStructureError("a_ineq/b_ineq row counts differ")
        lower = None if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        upper = None if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        for name, arr in (("lower", lower), ("upper", upper)):
            if arr is not None and arr.size != n:
                raise QpStructureError(f"{name} bound length {arr.size} != {n}")
        if lower is not None and upper is not None and np.any(lower > upper + 1e-12):
            raise QpStructureError("lower bound exceeds upper bound")
        for row in self.quad_rows:
            if row.lin.size != n:
                raise QpStructureError("quad row linear part has wrong length")
            if row.idx.size and (row.idx.min() < 0 or row.idx.max() >= n):
                raise QpStructureError("quad row index out of range")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "a_ineq", a_ineq)
        object.__setattr__(self, "b_ineq", b_ineq)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "quad_rows", tuple(self.quad_rows))

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.q @ x + self.c @ x)


@dataclass(frozen=True)
class InfeasibilityReport:
    """Max-violation certificate from the elastic feasibility solve."""

    max_violation: float
    rows: tuple[tuple[str, int, float], ...]   # (kind, index, violation)

    def describe(self) -> str:
        parts = [f"{kind}[{idx}] violated by {v:.6g}" for kind, idx, v in self.rows]
        return "; ".join(parts) if parts else f"max violation {self.max_violation:.6g}"


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    box_lower_duals: np.ndarray
    box_upper_duals: np.ndarray
    quad_duals: np.ndarray
    status: str
    objective: float
    stationarity_residual: float
    primal_residual: float
    complementarity_residual: float
    iterations: int
    infeasibility: InfeasibilityReport | None = None


def _as_matrix(a, n: int, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, n)
    arr = np.atleast_2d(arr)
    if arr.shape[1] != n:
        raise QpStructureError(f"{name} has {arr.shape[1]} columns, expected {n}")
    return arr


def _check_psd(q: np.ndarray) -> None:
    n = q.shape[0]
    if n == 0:
        return
    scale = max(1.0, float(np.max(np.abs(q), initial=0.0)))
    off = q - np.diag(np.diag(q))
    if not np.any(off):
        if np.min(np.diag(q), initial=0.0) < -1e-9 * scale:
            raise QpStructureError("Q has a negative diagonal entry (not PSD)")
        return
    w = np.linalg.eigvalsh(q)
    if w[0] < -1e-9 * scale:
        raise QpStructureError(f"Q is not positive semidefinite (min eigenvalue {w[0]:.3e})")


# --- internal expanded form ------------------------------------------------
#
# Equalities absorb fixed boxes (lower == upper).  All remaining inequalities
# are stacked as F(x) <= 0 in the fixed order: a_ineq rows, finite upper
# boxes, finite lower boxes, quad rows.  Labels keep the mapping back to the
# caller's structure for duals and certificates.


class _Expanded:
    def __init__(self, qp: QuadraticProgram):
        n = qp.n
        self.qp = qp
        eq_rows = [qp.a_eq]
        eq_rhs = [qp.b_eq]
        self.fixed_vars: list[int] = []
        lower, upper = qp.lower, qp.upper
        if lower is not None and upper is not None:
            fixed = np.where(np.isfinite(lower) & (np.abs(upper - lower) <= 1e-12))[0]
            self.fixed_vars = [int(i) for i in fixed]
        fixed_set = set(self.fixed_vars)
        if self.fixed_vars:
            rows = np.zeros((len(self.fixed_vars), n))
            for r, i in enumerate(self.fixed_vars):
                rows[r, i] = 1.0
            eq_rows.append(rows)
            eq_rhs.append(lower[self.fixed_vars])
        self.a = np.vstack(eq_rows) if n else np.zeros((0, 0))
        self.b = np.concatenate(eq_rhs) if eq_rhs else np.zeros(0)
        self.p0 = qp.a_eq.shape[0]

        c_rows: list[np.ndarray] = []
        d_vals: list[float] = []
        self.labels: list[tuple[str, int]] = []
        for i in range(qp.a_ineq.shape[0]):
            c_rows.append(qp.a_ineq[i])
            d_vals.append(qp.b_ineq[i])
            self.labels.append(("ineq", i))
        if upper is not None:
            for i in range(n):
                if i in fixed_set or not np.isfinite(upper[i]):
                    continue
                row = np.zeros(n)
                row[i] = 1.0
                c_rows.append(row)
                d_vals.append(upper[i])
                self.labels.append(("box_upper", i))
        if lower is not None:
            for i in range(n):
                if i in fixed_set or not np.isfinite(lower[i]):
                    continue
                row = np.zeros(n)
                row[i] = -1.0
                c_rows.append(row)
                d_vals.append(-lower[i])
                self.labels.append(("box_lower", i))
        self.c_mat = np.array(c_rows).reshape(len(c_rows), n)
        self.d = np.array(d_vals)
        self.quads = qp.quad_rows
        for k in range(len(self.quads)):
            self.labels.append(("quad", k))
        self.n = n
        self.k_lin = self.c_mat.shape[0]
        self.k = self.k_lin + len(self.quads)
        self.p = self.a.shape[0]

    def f_values(self, x: np.ndarray) -> np.ndarray:
        vals = self.c_mat @ x - self.d if self.k_lin else np.zeros(0)
        if self.quads:
            vals = np.concatenate([vals, [row.value(x) for row in self.quads]])
        return vals

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        if not self.quads:
            return self.c_mat
        grads = np.array([row.gradient(x) for row in self.quads])
        return np.vstack([self.c_mat, grads]) if self.k_lin else grads

    def lagrangian_hessian(self, mu: np.ndarray) -> np.ndarray:
        h = self.qp.q.copy()
        for k, row in enumerate(self.quads):
            h[np.arange(self.n), np.arange(self.n)] += mu[self.k_lin + k] * row.curvature_diag(self.n)
        return h


def _solve_kkt(m: np.ndarray, a: np.ndarray, rhs_x: np.ndarray, rhs_e: np.ndarray,
               reg: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve M dx - A' dl = rhs_x, A dx = rhs_e with refinement.

    Factors the quasidefinite form [[M + reg I, A'], [A, -reg I]] and flips the
    multiplier block so dl matches stationarity written as Qx + c - A'nu + J'mu.
    """
    n, p = m.shape[0], a.shape[0]
    kkt = np.zeros((n + p, n + p))
    kkt[:n, :n] = m + reg * np.eye(n)
    if p:
        kkt[:n, n:] = a.T
        kkt[n:, :n] = a
        kkt[n:, n:] = -reg * np.eye(p)
    rhs = np.concatenate([rhs_x, rhs_e])
    lu, piv = scipy.linalg.lu_factor(kkt)
    sol = scipy.linalg.lu_solve((lu, piv), rhs)
    # one refinement pass against the unregularized operator
    kkt0 = kkt.copy()
    kkt0[:n, :n] -= reg * np.eye(n)
    if p:
        kkt0[n:, n:] += reg * np.eye(p)
    resid = rhs - kkt0 @ sol
    sol = sol + scipy.linalg.lu_solve((lu, piv), resid)
    return sol[:n], -sol[n:]


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _true_residuals(ex: _Expanded, x, nu, mu) -> tuple[float, float, float]:
    qp = ex.qp
    f = ex.f_values(x)
    j = ex.jacobian(x)
    r_dual = qp.q @ x + qp.c - (ex.a.T @ nu if ex.p else 0.0) + (j.T @ mu if ex.k else 0.0)
    stat = float(np.max(np.abs(r_dual), initial=0.0))
    pri_eq = float(np.max(np.abs(ex.a @ x - ex.b), initial=0.0)) if ex.p else 0.0
    pri_in = float(np.max(f, initial=0.0)) if ex.k else 0.0
    pri = max(pri_eq, max(pri_in, 0.0))
    comp = float(abs(mu @ f)) if ex.k else 0.0
    return stat, pri, comp


def _start_point(ex: _Expanded) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = ex.n
    if ex.p:
        x0 = np.linalg.lstsq(ex.a, ex.b, rcond=None)[0]
    else:
        x0 = np.zeros(n)
    f0 = ex.f_values(x0)
    raw = -f0
    shift = max(0.0, -1.5 * float(np.min(raw, initial=0.0)))
    pad = 0.1 * max(1.0, float(np.mean(np.abs(raw))) if raw.size else 1.0)
    s0 = raw + shift + pad
    s0 = np.maximum(s0, 1e-2)
    grad = ex.qp.q @ x0 + ex.qp.c
    mu0 = np.full(ex.k, max(1.0, float(np.max(np.abs(grad), initial=0.0)) / 10.0))
    nu0 = np.zeros(ex.p)
    return x0, nu0, s0, mu0


def _solve_equality_only(qp: QuadraticProgram, ex: _Expanded) -> QpSolution:
    """No inequality rows at all: direct reduced-space solve."""
    n, a, b = ex.n, ex.a, ex.b
    if ex.p:
        x_p, res, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if np.max(np.abs(a @ x_p - b), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(b), initial=0.0)):
            rep = InfeasibilityReport(float(np.max(np.abs(a @ x_p - b))), (("eq", int(np.argmax(np.abs(a @ x_p - b))), float(np.max(np.abs(a @ x_p - b)))),))
            return _failed_solution(qp, ex, "infeasible", rep)
        _, sv, vt = np.linalg.svd(a)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if sv.size else 1.0)))
        z = vt[rank:].T      # nullspace basis
    else:
        x_p = np.zeros(n)
        z = np.eye(n)
    if z.shape[1]:
        h_red = z.T @ qp.q @ z
        g_red = z.T @ (qp.q @ x_p + qp.c)
        y, res, rk, sv = np.linalg.lstsq(h_red, -g_red, rcond=None)
        # unbounded if the gradient has a component outside the Hessian range
        if np.max(np.abs(h_red @ y + g_red), initial=0.0) > 1e-7 * max(1.0, float(np.max(np.abs(g_red), initial=0.0))):
            return _failed_solution(qp, ex, "unbounded", None)
        x = x_p + z @ y
    else:
        x = x_p
    nu = np.linalg.lstsq(ex.a.T, qp.q @ x + qp.c, rcond=None)[0] if ex.p else np.zeros(0)
    return _package(qp, ex, x, nu, np.zeros(0), "optimal", iterations=0)


def _failed_solution(qp: QuadraticProgram, ex: _Expanded, status: str,
                     report: InfeasibilityReport | None, iterations: int = 0) -> QpSolution:
    n = qp.n
    return QpSolution(
        x=np.full(n, np.nan), eq_duals=np.zeros(qp.a_eq.shape[0]),
        ineq_duals=np.zeros(qp.a_ineq.shape[0]), box_lower_duals=np.zeros(n),
        box_upper_duals=np.zeros(n), quad_duals=np.zeros(len(qp.quad_rows)),
        status=status, objective=np.nan, stationarity_residual=np.inf,
        primal_residual=np.inf, complementarity_residual=np.inf,
        iterations=iterations, infeasibility=report)


def _package(qp: QuadraticProgram, ex: _Expanded, x, nu, mu, status, iterations) -> QpSolution:
    n = qp.n
    ineq_duals = np.zeros(qp.a_ineq.shape[0])
    box_lo = np.zeros(n)
    box_up = np.zeros(n)
    quad_duals = np.zeros(len(qp.quad_rows))
    for r, (kind, idx) in enumerate(ex.labels):
        val = mu[r] if r < mu.size else 0.0
        if kind == "ineq":
            ineq_duals[idx] = val
        elif kind == "box_upper":
            box_up[idx] = val
        elif kind == "box_lower":
            box_lo[idx] = val
        else:
            quad_duals[idx] = val
    eq_duals = nu[:ex.p0].copy() if ex.p else np.zeros(0)
    # fixed variables were promoted to equality rows; report their duals on the box sides
    for r, i in enumerate(ex.fixed_vars):
        v = nu[ex.p0 + r]
        box_up[i] = max(-v, 0.0)
        box_lo[i] = max(v, 0.0)
    stat, pri, comp = _true_residuals(ex, x, nu, mu if mu.size else np.zeros(ex.k))
    return QpSolution(
        x=x.copy(), eq_duals=eq_duals, ineq_duals=ineq_duals,
        box_lower_duals=box_lo, box_upper_duals=box_up, quad_duals=quad_duals,
        status=status, objective=qp.objective(x),
        stationarity_residual=stat, primal_residual=pri,
        complementarity_residual=comp, iterations=iterations)


def _polish(ex: _Expanded, x, nu, s, mu, tol: float):
    """Newton refinement on the apparent active set; None if it fails.

    Tries the slack-ratio active set first, then one keyed to the dual scale;
    the latter catches rows whose multipliers are small because the objective
    itself is small (heavily regularized programs).
    """
    candidates = [np.where(mu >= s)[0]]
    mu_max = float(np.max(mu, initial=0.0))
    if mu_max > 0.0:
        scaled = np.where((mu >= s) | (mu >= 1e-2 * mu_max))[0]
        if scaled.size != candidates[0].size:
            candidates.append(scaled)
    for active in candidates:
        result = _polish_from(ex, x, nu, mu, active, tol)
        if result is not None:
            return result
    return None


def _polish_from(ex: _Expanded, x, nu, mu, active, tol: float):
    n, p = ex.n, ex.p
    for _ in range(6):
        x_p, nu_p, mu_act = x.copy(), nu.copy(), np.maximum(mu[active], 0.0)
        for _ in range(3):
            mu_full = np.zeros(ex.k)
            mu_full[active] = mu_act
            j = ex.jacobian(x_p)
            j_act = j[active] if active.size else np.zeros((0, n))
            f_act = ex.f_values(x_p)[active] if active.size else np.zeros(0)
            h = ex.lagrangian_hessian(mu_full)
            r1 = ex.qp.q @ x_p + ex.qp.c - (ex.a.T @ nu_p if p else 0.0) + (j.T @ mu_full if ex.k else 0.0)
            r2 = ex.a @ x_p - ex.b if p else np.zeros(0)
            na = active.size
            kkt = np.zeros((n + p + na, n + p + na))
            kkt[:n, :n] = h
            if p:
                kkt[:n, n:n + p] = -ex.a.T
                kkt[n:n + p, :n] = ex.a
            if na:
                kkt[:n, n + p:] = j_act.T
                kkt[n + p:, :n] = j_act
            rhs = -np.concatenate([r1, r2, f_act])
            try:
                step = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            except np.linalg.LinAlgError:
                return None
            x_p = x_p + step[:n]
            if p:
                nu_p = nu_p + step[n:n + p]
            if na:
                mu_act = mu_act + step[n + p:]
        if active.size and np.any(mu_act < -1e-9):
            active = active[mu_act >= -1e-9]
            continue
        mu_full = np.zeros(ex.k)
        mu_full[active] = np.maximum(mu_act, 0.0)
        stat, pri, comp = _true_residuals(ex, x_p, nu_p, mu_full)
        if max(stat, pri, comp) <= tol:
            return x_p, nu_p, mu_full
        # a weakly active row (tiny dual, shrinking slack) can be missing from
        # the guess; grow the set with whatever the polished point violates
        violated = np.where(ex.f_values(x_p) > tol)[0]
        grown = np.union1d(active, violated)
        if violated.size and grown.size > active.size:
            active = grown
            continue
        return None
    return None


def _phase1(qp: QuadraticProgram, ex: _Expanded, tol: float) -> tuple[float, InfeasibilityReport]:
    """Elastic feasibility: min t  s.t. every residual <= t, t >= -1."""
    n = ex.n
    nn = n + 1
    q1 = np.zeros((nn, nn))
    q1[:n, :n] = 1e-10 * np.eye(n)     # keeps x compact, does not move the verdict
    c1 = np.zeros(nn)
    c1[n] = 1.0
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for i in range(ex.p):
        r = np.zeros(nn)
        r[:n] = ex.a[i]
        r[n] = -1.0
        rows.append(r.copy())
        rhs.append(float(ex.b[i]))
        r[:n] = -ex.a[i]
        rows.append(r)
        rhs.append(float(-ex.b[i]))
    for i in range(ex.k_lin):
        r = np.zeros(nn)
        r[:n] = ex.c_mat[i]
        r[n] = -1.0
        rows.append(r)
        rhs.append(float(ex.d[i]))
    t_floor = np.zeros(nn)
    t_floor[n] = -1.0
    rows.append(t_floor)
    rhs.append(1.0)
    quad1 = []
    for row in ex.quads:
        lin = np.zeros(nn)
        lin[:n] = row.lin
        lin[n] = -1.0
        quad1.append(QuadRow(idx=row.idx, coef=row.coef, lin=lin, rhs=row.rhs))
    prob = QuadraticProgram(
        q=q1, c=c1, a_eq=np.zeros((0, nn)), b_eq=np.zeros(0),
        a_ineq=np.array(rows), b_ineq=np.array(rhs), quad_rows=tuple(quad1))
    sol = _interior_point(prob, _Expanded(prob), min(tol, 1e-8), allow_phase1=False)
    if sol.status != "optimal":
        # cannot certify; report the least-violation point we have
        return np.inf, InfeasibilityReport(np.inf, ())
    t_star = float(sol.x[n])
    x_star = sol.x[:n]
    viol: list[tuple[str, int, float]] = []
    if ex.p:
        eq_res = np.abs(ex.a @ x_star - ex.b)
        for i in np.where(eq_res >= max(t_star - 1e-6, _FEAS_TOL))[0]:
            kind = ("eq", int(i)) if i < ex.p0 else ("fixed", ex.fixed_vars[int(i) - ex.p0])
            viol.append((kind[0], kind[1], float(eq_res[i])))
    f_vals = ex.f_values(x_star)
    for i in np.where(f_vals >= max(t_star - 1e-6, _FEAS_TOL))[0]:
        kind, idx = ex.labels[int(i)]
        viol.append((kind, idx, float(f_vals[i])))
    viol.sort(key=lambda t: -t[2])
    return t_star, InfeasibilityReport(max(t_star, 0.0), tuple(viol[:8]))


def _interior_point(qp: QuadraticProgram, ex: _Expanded, tol: float,
                    allow_phase1: bool = True, max_iterations: int = _MAX_ITERATIONS) -> QpSolution:
    n, p, k = ex.n, ex.p, ex.k
    if k == 0:
        return _solve_equality_only(qp, ex)
    x, nu, s, mu = _start_point(ex)
    obj0 = abs(qp.objective(x)) + 1.0
    best_pri = np.inf
    stall = 0
    status = "max_iterations"
    it = 0
    snapshot = (x.copy(), nu.copy(), s.copy(), mu.copy())
    for it in range(1, max_iterations + 1):
        if not all(np.all(np.isfinite(v)) for v in (x, nu, s, mu)):
            x, nu, s, mu = snapshot
            break
        snapshot = (x.copy(), nu.copy(), s.copy(), mu.copy())
        f = ex.f_values(x)
        j = ex.jacobian(x)
        stat, pri, comp = _true_residuals(ex, x, nu, mu)
        gap = float(s @ mu) / k
        if stat <= tol and pri <= tol and comp <= tol and float(s @ mu) <= 10 * tol:
            status = "optimal"
            break
        if max(stat, pri, comp) <= 1e3 * tol or gap <= 1e-4 * obj0:
            polished = _polish(ex, x, nu, s, mu, tol)
            if polished is not None:
                x, nu, mu_full = polished
                return _package(qp, ex, x, nu, mu_full, "optimal", it)
        if pri < best_pri - 1e-12:
            best_pri = pri
            stall = 0
        else:
            stall += 1
        dual_norm = max(float(np.max(np.abs(mu), initial=0.0)), float(np.max(np.abs(nu), initial=0.0)))
        if dual_norm > _DIVERGENCE_CAP and pri > tol:
            break
        if qp.objective(x) < -_DIVERGENCE_CAP * obj0 or np.max(np.abs(x)) > _DIVERGENCE_CAP:
            if pri <= 1e-6:
                return _failed_solution(qp, ex, "unbounded", None, it)
            break
        if stall > 30:
            break

        r_dual = qp.q @ x + qp.c - (ex.a.T @ nu if p else 0.0) + j.T @ mu
        r_eq = ex.a @ x - ex.b if p else np.zeros(0)
        r_ineq = f + s
        h = ex.lagrangian_hessian(mu)
        d_scale = np.minimum(mu / s, 1e14)   # bound the barrier diagonal near degeneracy
        m = h + (j.T * d_scale) @ j
        reg = 1e-12 * max(1.0, float(np.max(np.abs(m))))

        # affine-scaling predictor
        g_aff = (-s * mu + mu * r_ineq) / s
        rx = -r_dual - j.T @ g_aff
        try:
            dx_a, dl_a = _solve_kkt(m, ex.a, rx, -r_eq, reg)
        except (np.linalg.LinAlgError, ValueError):
            break
        ds_a = -r_ineq - j @ dx_a
        dmu_a = (-s * mu - mu * ds_a) / s
        alpha_p_a = min(1.0, _max_step(s, ds_a))
        alpha_d_a = min(1.0, _max_step(mu, dmu_a))
        gap_aff = float((s + alpha_p_a * ds_a) @ (mu + alpha_d_a * dmu_a)) / k
        sigma = np.clip((gap_aff / max(gap, 1e-300)) ** 3, 1e-8, 1.0 - 1e-8)

        # corrector with second-order terms (exact for quadratic rows)
        soc = np.zeros(k)
        for kk, row in enumerate(ex.quads):
            soc[ex.k_lin + kk] = -float(np.dot(row.coef, dx_a[row.idx] ** 2))
        comp_rhs = sigma * gap - s * mu - ds_a * dmu_a
        g_cor = (comp_rhs + mu * (r_ineq - soc)) / s
        rx = -r_dual - j.T @ g_cor
        try:
            dx, dl = _solve_kkt(m, ex.a, rx, -r_eq, reg)
        except (np.linalg.LinAlgError, ValueError):
            break
        ds = -r_ineq + soc - j @ dx
        dmu = (comp_rhs - mu * ds) / s

        tau = 0.9995
        alpha_p = min(1.0, tau * _max_step(s, ds))
        alpha_d = min(1.0, tau * _max_step(mu, dmu))
        x = x + alpha_p * dx
        s = s + alpha_p * ds
        nu = nu + alpha_d * dl
        mu = mu + alpha_d * dmu
        s = np.maximum(s, 1e-300)
        mu = np.maximum(mu, 1e-300)
    else:
        it = max_iterations

    if status == "optimal":
        polished = _polish(ex, x, nu, s, mu, tol)
        if polished is not None:
            xp, nup, mup = polished
            sp, pp, cp = _true_residuals(ex, xp, nup, mup)
            if max(sp, pp, cp) <= max(*_true_residuals(ex, x, nu, mu)):
                return _package(qp, ex, xp, nup, mup, "optimal", it)
        return _package(qp, ex, x, nu, mu, "optimal", it)

    # degenerate programs can stop short of tolerance; a Newton polish from the
    # last finite iterate often lands the exact solution anyway
    if all(np.all(np.isfinite(v)) for v in (x, nu, s, mu)):
        polished = _polish(ex, x, nu, s, mu, tol)
        if polished is not None:
            xp, nup, mup = polished
            return _package(qp, ex, xp, nup, mup, "optimal", it)

    if not allow_phase1:
        return _failed_solution(qp, ex, "max_iterations", None, it)
    t_star, report = _phase1(qp, ex, tol)
    if t_star > _FEAS_TOL:
        return _failed_solution(qp, ex, "infeasible", report, it)
    # feasible per phase-1: either unbounded or numerically stuck
    if np.max(np.abs(x)) > 1e8 or qp.objective(x) < -1e8 * obj0:
        return _failed_solution(qp, ex, "unbounded", None, it)
    return _failed_solution(qp, ex, "max_iterations", None, it)


def solve_qp(qp: QuadraticProgram, tol: float = DEFAULT_TOL,
             max_iterations: int = _MAX_ITERATIONS) -> QpSolution:
    """Solve a convex QP; the returned status is certified by re-evaluated residuals."""
    if not (0 < tol <= 1e-2):
        raise QpStructureError(f"tol must be in (0, 1e-2], got {tol}")
    ex = _Expanded(qp)
    return _interior_point(qp, ex, tol, max_iterations=max_iterations)


def kkt_residuals(qp: QuadraticProgram, sol: QpSolution) -> tuple[float, float, float]:
    """Re-evaluate (stationarity, primal, complementarity) infinity-norm residuals.

    Pure function of the problem data and the candidate point; does not trust
    anything stored on the solution beyond x and the duals.
    """
    ex = _Expanded(qp)
    mu = np.zeros(ex.k)
    for r, (kind, idx) in enumerate(ex.labels):
        if kind == "ineq":
            mu[r] = sol.ineq_duals[idx]
        elif kind == "box_upper":
            mu[r] = sol.box_upper_duals[idx]
        elif kind == "box_lower":
            mu[r] = sol.box_lower_duals[idx]
        else:
            mu[r] = sol.quad_duals[idx]
    nu = sol.eq_duals
    if ex.fixed_vars:
        extra = np.array([sol.box_lower_duals[i] - sol.box_upper_duals[i] for i in ex.fixed_vars])
        nu = np.concatenate([sol.eq_duals, extra])
    return _true_residuals(ex, sol.x, nu, mu)
