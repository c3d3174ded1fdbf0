import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from cimcs.coupling import DenseCoupling
from cimcs.lasso import (ista_fixed_point_residual, largest_eigenvalue, lasso_objective, run_ista,
                         soft_threshold, solve_l1_equality)
from cimcs.problem import Chi, InstanceParams, SourceDistribution, synthesize

from oracles import coordinate_descent_lasso


def test_soft_threshold_values():
    h = np.array([-0.5, -0.05, 0.0, 0.05, 0.5])
    assert soft_threshold(h, 0.1, Chi.SIGNED) == pytest.approx([-0.4, 0, 0, 0, 0.4])
    assert soft_threshold(h, 0.1, Chi.NONNEG) == pytest.approx([0, 0, 0, 0, 0.4])


@given(st.floats(-5, 5), st.floats(0, 2))
def test_soft_threshold_is_proximal_map(h, eta):
    # argmin_x 1/2 (x - h)^2 + eta |x|
    grid = np.linspace(-6, 6, 120_001)
    ref = grid[np.argmin(0.5 * (grid - h) ** 2 + eta * np.abs(grid))]
    assert float(soft_threshold(h, eta, Chi.SIGNED)) == pytest.approx(ref, abs=2e-4)


@pytest.mark.parametrize("dist", [SourceDistribution.gaussian(), SourceDistribution.half_gaussian()],
                         ids=["signed", "nonneg"])
@pytest.mark.parametrize("accelerate", [False, True])
def test_ista_matches_coordinate_descent(dist, accelerate):
    inst = synthesize(InstanceParams(80, 0.6, 0.2, beta=0.02, dist=dist, seed=5))
    res = run_ista(inst, 0.05, inst.chi, accelerate=accelerate, tol=1e-12, max_iters=100_000)
    ref = coordinate_descent_lasso(inst.a_mat, inst.y, 0.05, nonneg=not dist.signed)
    assert res.converged
    assert res.x == pytest.approx(ref, abs=1e-7)
    assert ista_fixed_point_residual(inst, res.x, 0.05, inst.chi) < 1e-9
    if not dist.signed:
        assert res.x.min() >= 0


def test_objective_monotone_without_acceleration():
    inst = synthesize(InstanceParams(80, 0.5, 0.2, seed=1))
    res = run_ista(inst, 0.02, Chi.SIGNED, record_objective=True, max_iters=3000)
    assert np.all(np.diff(res.objective) <= 1e-12)
    assert res.objective[-1] == pytest.approx(lasso_objective(inst.coupling, res.x, 0.02))


def test_largest_eigenvalue_paths(rng):
    a = rng.standard_normal((30, 50))
    cpl = DenseCoupling(a, np.zeros(30))
    assert largest_eigenvalue(cpl) == pytest.approx(np.linalg.eigvalsh(a.T @ a)[-1], rel=1e-9)


def test_negative_eta_rejected():
    with pytest.raises(ValueError):
        run_ista(synthesize(InstanceParams(10, 0.5, 0.2)), -1.0, Chi.SIGNED)


class _RowOrthonormal:
    def __init__(self, a):
        self.a = a

    def forward(self, x):
        return self.a @ x

    def adjoint(self, d):
        return self.a.T @ d


def test_l1_equality_matches_linear_program(rng):
    n, m = 40, 24
    q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    op = _RowOrthonormal(q.T)
    x = np.zeros(n)
    x[rng.choice(n, 10, replace=False)] = rng.standard_normal(10)
    y = op.forward(x)
    # min 1'(u + v) with A(u - v) = y, u, v >= 0
    lp = linprog(np.ones(2 * n), A_eq=np.hstack([q.T, -q.T]), b_eq=y, bounds=(0, None), method="highs")
    ref = lp.x[:n] - lp.x[n:]
    res = solve_l1_equality(op, y, max_iters=20_000, tol=1e-10)
    assert res.converged
    assert res.feasibility < 1e-10
    assert np.abs(res.x).sum() == pytest.approx(np.abs(ref).sum(), rel=1e-6)
    assert res.x == pytest.approx(ref, abs=1e-5)
