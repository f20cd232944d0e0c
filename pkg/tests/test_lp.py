import numpy as np
import pytest
import scipy.optimize as sco

from fairdro.solver import Constraint, LpInstance, solve_lp


def _scipy_solve(inst):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for con in inst.constraints:
        if con.rel == "<=":
            A_ub.append(con.coeffs)
            b_ub.append(con.rhs)
        elif con.rel == ">=":
            A_ub.append(-con.coeffs)
            b_ub.append(-con.rhs)
        else:
            A_eq.append(con.coeffs)
            b_eq.append(con.rhs)
    return sco.linprog(
        inst.objective,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=inst.bounds, method="highs",
        options={"presolve": False})


def test_simple_lp():
    # min -x - 2y st x + y <= 4, x <= 3, x,y >= 0
    inst = LpInstance(
        np.array([-1.0, -2.0]),
        [Constraint(np.array([1.0, 1.0]), "<=", 4.0)],
        [(0.0, 3.0), (0.0, None)],
    )
    sol = solve_lp(inst)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-8.0)
    assert sol.x == pytest.approx([0.0, 4.0])


def test_equality_and_free_vars():
    # min x + y st x - y = 2, x + y >= 1, both free
    inst = LpInstance(
        np.array([1.0, 1.0]),
        [Constraint(np.array([1.0, -1.0]), "=", 2.0),
         Constraint(np.array([1.0, 1.0]), ">=", 1.0)],
    )
    sol = solve_lp(inst)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)


def test_infeasible():
    inst = LpInstance(
        np.array([1.0]),
        [Constraint(np.array([1.0]), "<=", 0.0),
         Constraint(np.array([1.0]), ">=", 1.0)],
    )
    assert solve_lp(inst).status == "infeasible"


def test_unbounded():
    inst = LpInstance(np.array([-1.0]), [], [(0.0, None)])
    assert solve_lp(inst).status == "unbounded"


def test_duals_transport():
    # 2x2 transport problem; duals must reproduce the objective
    cost = np.array([1.0, 3.0, 2.0, 1.0])  # arcs 00,01,10,11
    cons = [
        Constraint(np.array([1.0, 1.0, 0.0, 0.0]), "=", 0.6),
        Constraint(np.array([0.0, 0.0, 1.0, 1.0]), "=", 0.4),
        Constraint(np.array([1.0, 0.0, 1.0, 0.0]), "=", 0.5),
        Constraint(np.array([0.0, 1.0, 0.0, 1.0]), "=", 0.5),
    ]
    inst = LpInstance(cost, cons, [(0.0, None)] * 4)
    sol = solve_lp(inst)
    assert sol.status == "optimal"
    rhs = np.array([0.6, 0.4, 0.5, 0.5])
    assert float(sol.duals @ rhs) == pytest.approx(sol.objective, abs=1e-9)
    assert sol.gap < 1e-9


@pytest.mark.parametrize("seed", range(25))
def test_random_lps_match_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 6))
    obj = rng.normal(size=n)
    cons = []
    for _ in range(m):
        rel = rng.choice(["<=", ">=", "="])
        cons.append(Constraint(rng.normal(size=n), rel,
                               float(rng.normal())))
    bounds = []
    for _ in range(n):
        kind = rng.integers(0, 3)
        if kind == 0:
            bounds.append((0.0, None))
        elif kind == 1:
            bounds.append((float(-rng.random() * 2), float(rng.random() * 2)))
        else:
            bounds.append((None, None))
    inst = LpInstance(obj, cons, bounds)
    mine = solve_lp(inst)
    ref = _scipy_solve(inst)
    if ref.status == 0:
        assert mine.status == "optimal"
        assert mine.objective == pytest.approx(ref.fun, abs=1e-7)
        assert mine.gap < 1e-6
    elif ref.status == 2:
        assert mine.status == "infeasible"
    elif ref.status == 3:
        assert mine.status == "unbounded"


def test_degenerate_cycling_guard():
    # classic degenerate vertex; Bland's rule must terminate
    obj = np.array([-0.75, 150.0, -0.02, 6.0])
    cons = [
        Constraint(np.array([0.25, -60.0, -0.04, 9.0]), "<=", 0.0),
        Constraint(np.array([0.5, -90.0, -0.02, 3.0]), "<=", 0.0),
        Constraint(np.array([0.0, 0.0, 1.0, 0.0]), "<=", 1.0),
    ]
    inst = LpInstance(obj, cons, [(0.0, None)] * 4)
    sol = solve_lp(inst)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)
