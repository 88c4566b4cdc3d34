"""QP engine: frozen examples, oracle agreement, certification properties."""
from __future__ import annotations

import numpy as np
import pytest

from hydrorights.qp import (
    QpStructureError,
    QuadRow,
    QuadraticProgram,
    kkt_residuals,
    solve_qp,
)
from _oracles import enumerate_qp


def _qp(q, c, a_eq=None, b_eq=None, a_ineq=None, b_ineq=None, **kw):
    c = np.asarray(c, dtype=float)
    n = c.size
    return QuadraticProgram(
        q=np.asarray(q, dtype=float),
        c=c,
        a_eq=np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float),
        b_eq=np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float),
        a_ineq=np.zeros((0, n)) if a_ineq is None else np.asarray(a_ineq, dtype=float),
        b_ineq=np.zeros(0) if b_ineq is None else np.asarray(b_ineq, dtype=float),
        **kw,
    )


def test_scalar_floor():
    # min x^2 subject to x >= 1: optimum at the floor with multiplier 2
    sol = solve_qp(_qp([[2.0]], [0.0], a_ineq=[[-1.0]], b_ineq=[-1.0]))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.ineq_duals[0] == pytest.approx(2.0, abs=1e-7)


def test_equality_split():
    # min 0.5||x||^2 subject to x1 + x2 = 2
    sol = solve_qp(_qp(np.eye(2), [0.0, 0.0], a_eq=[[1.0, 1.0]], b_eq=[2.0]))
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-8)
    assert sol.eq_duals[0] == pytest.approx(1.0, abs=1e-7)


def test_residuals_flag_perturbed_primal():
    import dataclasses

    prob = _qp([[2.0]], [0.0], a_ineq=[[-1.0]], b_ineq=[-1.0])
    sol = solve_qp(prob)
    bumped = dataclasses.replace(sol, x=sol.x + 1e-3)
    stat, pri, comp = kkt_residuals(prob, bumped)
    assert stat == pytest.approx(2e-3, rel=1e-6)
    assert pri == 0.0


def test_oracle_agreement_randomized():
    rng = np.random.default_rng(7)
    for trial in range(80):
        n = int(rng.integers(2, 7))
        p = int(rng.integers(0, 3))
        k = int(rng.integers(1, 5))
        root = rng.normal(size=(n, n))
        q = root.T @ root + 0.1 * np.eye(n)
        c = rng.normal(size=n)
        x_feas = rng.normal(size=n)
        a_eq = rng.normal(size=(p, n))
        b_eq = a_eq @ x_feas
        a_in = rng.normal(size=(k, n))
        b_in = a_in @ x_feas + rng.uniform(0.1, 2.0, size=k)
        prob = _qp(q, c, a_eq=a_eq, b_eq=b_eq, a_ineq=a_in, b_ineq=b_in)
        sol = solve_qp(prob)
        assert sol.status == "optimal", f"trial {trial}"
        oracle = enumerate_qp(q, c, a_eq, b_eq, a_in, b_in)
        assert oracle is not None
        assert sol.objective == pytest.approx(oracle[0], abs=1e-7), f"trial {trial}"


def test_certification_randomized():
    rng = np.random.default_rng(11)
    for trial in range(60):
        n = int(rng.integers(2, 21))
        rank = int(rng.integers(1, n + 1))
        root = rng.normal(size=(rank, n))
        q = root.T @ root
        c = rng.normal(size=n)
        p = int(rng.integers(0, max(1, n // 2)))
        x_feas = rng.uniform(-2.0, 2.0, size=n)
        a_eq = rng.normal(size=(p, n))
        b_eq = a_eq @ x_feas
        k = int(rng.integers(0, 9))
        a_in = rng.normal(size=(k, n))
        b_in = a_in @ x_feas + rng.uniform(0.05, 1.5, size=k)
        prob = QuadraticProgram(q=q, c=c, a_eq=a_eq, b_eq=b_eq, a_ineq=a_in, b_ineq=b_in,
                                lower=np.full(n, -50.0), upper=np.full(n, 50.0))
        sol = solve_qp(prob)
        assert sol.status == "optimal", f"trial {trial}"
        stat, pri, comp = kkt_residuals(prob, sol)
        assert max(stat, pri, comp) <= 1e-6, f"trial {trial}: {stat}, {pri}, {comp}"


def test_dual_scaling():
    q = np.diag([2.0, 4.0])
    c = np.array([-1.0, -2.0])
    a_in = np.array([[1.0, 1.0]])
    b_in = np.array([0.4])
    base = solve_qp(_qp(q, c, a_ineq=a_in, b_ineq=b_in))
    scaled = solve_qp(_qp(5.0 * q, 5.0 * c, a_ineq=a_in, b_ineq=b_in))
    assert base.status == scaled.status == "optimal"
    np.testing.assert_allclose(scaled.x, base.x, atol=1e-7)
    np.testing.assert_allclose(scaled.ineq_duals, 5.0 * base.ineq_duals, atol=1e-6)


def test_strong_duality_gap():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(2, 10))
        root = rng.normal(size=(n, n))
        q = root.T @ root + 0.05 * np.eye(n)
        c = rng.normal(size=n)
        x_feas = rng.normal(size=n)
        a_in = rng.normal(size=(4, n))
        b_in = a_in @ x_feas + rng.uniform(0.1, 1.0, size=4)
        prob = _qp(q, c, a_ineq=a_in, b_ineq=b_in)
        sol = solve_qp(prob)
        assert sol.status == "optimal"
        # dual objective = Lagrangian at the KKT point (x minimizes L there)
        lagr = sol.objective + float(sol.ineq_duals @ (a_in @ sol.x - b_in))
        assert abs(sol.objective - lagr) <= 1e-6 * (1.0 + abs(sol.objective))


def test_infeasible_box_pair():
    prob = _qp([[2.0]], [0.0], a_ineq=[[-1.0], [1.0]], b_ineq=[-2.0, 1.0])  # x>=2 and x<=1
    sol = solve_qp(prob)
    assert sol.status == "infeasible"
    assert sol.infeasibility is not None
    assert sol.infeasibility.max_violation >= 0.4
    assert len(sol.infeasibility.rows) >= 1


def test_infeasible_equalities():
    prob = _qp(np.eye(2), [0.0, 0.0], a_eq=[[1.0, 0.0], [1.0, 0.0]], b_eq=[0.0, 1.0])
    sol = solve_qp(prob)
    assert sol.status == "infeasible"


def test_unbounded_linear():
    prob = _qp([[0.0]], [-1.0], a_ineq=[[-1.0]], b_ineq=[0.0])  # min -x, x >= 0
    sol = solve_qp(prob)
    assert sol.status == "unbounded"


def test_quad_row_epigraph():
    # min w subject to 0.5 u^2 + u - w <= 0 and u fixed at 3
    row = QuadRow(idx=[0], coef=[0.5], lin=np.array([1.0, -1.0]), rhs=0.0)
    prob = QuadraticProgram(
        q=np.zeros((2, 2)), c=np.array([0.0, 1.0]),
        a_eq=np.zeros((0, 2)), b_eq=np.zeros(0),
        a_ineq=np.zeros((0, 2)), b_ineq=np.zeros(0),
        lower=np.array([3.0, -np.inf]), upper=np.array([3.0, np.inf]),
        quad_rows=(row,))
    sol = solve_qp(prob)
    assert sol.status == "optimal"
    assert sol.x[1] == pytest.approx(0.5 * 9 + 3, abs=1e-7)
    assert sol.quad_duals[0] == pytest.approx(1.0, abs=1e-7)


def test_quad_rows_against_slsqp():
    from scipy.optimize import minimize

    rng = np.random.default_rng(23)
    for trial in range(10):
        n = 4
        q = np.diag(rng.uniform(0.5, 2.0, size=n))
        c = rng.normal(size=n)
        coef = rng.uniform(0.1, 1.0, size=2)
        lin = rng.normal(size=n)
        x_feas = rng.uniform(-1.0, 1.0, size=n)
        rhs = float(np.dot(coef, x_feas[:2] ** 2) + lin @ x_feas + rng.uniform(0.2, 1.0))
        row = QuadRow(idx=[0, 1], coef=coef, lin=lin, rhs=rhs)
        prob = QuadraticProgram(
            q=q, c=c, a_eq=np.zeros((0, n)), b_eq=np.zeros(0),
            a_ineq=np.zeros((0, n)), b_ineq=np.zeros(0),
            lower=np.full(n, -5.0), upper=np.full(n, 5.0), quad_rows=(row,))
        sol = solve_qp(prob)
        assert sol.status == "optimal", f"trial {trial}"

        def f(x):
            return 0.5 * x @ q @ x + c @ x

        res = minimize(
            f, x_feas, method="SLSQP",
            constraints=[{"type": "ineq", "fun": lambda x: rhs - np.dot(coef, x[:2] ** 2) - lin @ x}],
            bounds=[(-5.0, 5.0)] * n,
            options={"ftol": 1e-12, "maxiter": 300})
        assert sol.objective <= res.fun + 1e-6, f"trial {trial}"
        assert abs(sol.objective - res.fun) <= 1e-5 * (1 + abs(res.fun)), f"trial {trial}"


def test_fixed_bounds_promoted():
    # equal lower/upper bounds become an equality internally; duals on box sides
    prob = QuadraticProgram(
        q=np.array([[2.0]]), c=np.array([-6.0]),
        a_eq=np.zeros((0, 1)), b_eq=np.zeros(0),
        a_ineq=np.zeros((0, 1)), b_ineq=np.zeros(0),
        lower=np.array([1.0]), upper=np.array([1.0]))
    sol = solve_qp(prob)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-10)
    # gradient at x=1 is 2*1-6=-4, so the upper-side multiplier carries 4
    assert sol.box_upper_duals[0] == pytest.approx(4.0, abs=1e-8)
    stat, pri, comp = kkt_residuals(prob, sol)
    assert max(stat, pri, comp) <= 1e-8


def test_structure_validation():
    with pytest.raises(QpStructureError):
        _qp([[-1.0]], [0.0])                        # not PSD
    with pytest.raises(QpStructureError):
        _qp([[1.0, 5.0], [0.0, 1.0]], [0.0, 0.0])   # not symmetric
    with pytest.raises(QpStructureError):
        _qp(np.eye(2), [0.0, 0.0], a_eq=[[1.0, 0.0]], b_eq=[1.0, 2.0])
    with pytest.raises(QpStructureError):
        QuadRow(idx=[0], coef=[-1.0], lin=np.zeros(1), rhs=0.0)
