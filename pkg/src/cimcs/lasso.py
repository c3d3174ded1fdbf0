"""L1 baselines: soft-thresholding iteration and equality-constrained L1 recovery."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .coupling import Coupling, as_coupling
from .problem import Chi


def soft_threshold(h, eta: float, chi):
    """Soft threshold ``T_{chi,eta}``; the non-negative variant clamps at 0."""
    h = np.asarray(h, dtype=float)
    if Chi.parse(chi) is Chi.NONNEG:
        return np.maximum(h - eta, 0.0)
    return np.sign(h) * np.maximum(np.abs(h) - eta, 0.0)


def largest_eigenvalue(cpl: Coupling) -> float:
    """Largest eigenvalue of the coupling matrix ``G``."""
    dense = cpl.dense
    if cpl.n <= 2:
        mat = dense if dense is not None else np.column_stack([cpl.column(i) for i in range(cpl.n)])
        return float(np.linalg.eigvalsh(mat)[-1])
    if dense is not None and cpl.n <= 1500:
        return float(scipy.linalg.eigvalsh(dense, subset_by_index=[cpl.n - 1, cpl.n - 1])[0])
    op = spla.LinearOperator((cpl.n, cpl.n), matvec=cpl.matvec, dtype=float)
    v0 = np.ones(cpl.n) / np.sqrt(cpl.n)
    return float(spla.eigsh(op, k=1, which="LA", v0=v0, tol=1e-10)[0][0])


@dataclass
class IstaResult:
    x: np.ndarray
    converged: bool
    iterations: int
    objective: list = field(default_factory=list)


def lasso_objective(cpl: Coupling, x, eta: float) -> float:
    """``1/2 x^T G x - b^T x + eta |x|_1`` (the data misfit up to the constant ``|y|^2/2``)."""
    return float(0.5 * x @ cpl.matvec(x) - cpl.zeeman @ x + eta * np.abs(x).sum())


def run_ista(problem, eta: float, chi, max_iters: int = 20000, tol: float = 1e-10, *,
             x0=None, step: float | None = None, record_objective: bool = False,
             accelerate: bool = False) -> IstaResult:
    """Iterative soft thresholding for ``min 1/2 |y - A x|^2 + eta |x|_1``.

    The update is ``x <- T_{chi, step*eta}(x + step * (b - G x))`` with
    ``b = A^T y`` and ``G = A^T A``. Its fixed points are those of the
    unit-step rule ``x = T_{chi,eta}(x + b - G x)`` for any step; the default
    step ``1 / lambda_max(G)`` makes the objective non-increasing.

    Parameters
    ----------
    problem : Instance or Coupling
    eta : float
        Threshold (L1 weight), ``>= 0``.
    chi : Chi
        ``NONNEG`` restricts ``x >= 0``.
    max_iters : int
    tol : float
        Stop when ``max |x_new - x| < tol``.
    x0 : array, optional
    step : float, optional
    record_objective : bool
        Keep the objective after every iteration.
    accelerate : bool
        Use Nesterov momentum with gradient-based restarts (same fixed
        points, far fewer iterations on ill-conditioned problems; the
        objective is then not monotone).

    Returns
    -------
    IstaResult
        ``converged`` is False if ``max_iters`` was reached; ``x`` is then the
        last iterate.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    cpl = as_coupling(problem)
    chi = Chi.parse(chi)
    if step is None:
        lmax = largest_eigenvalue(cpl)
        step = 1.0 / max(lmax, 1e-300)
    x = np.zeros(cpl.n) if x0 is None else np.array(x0, dtype=float)
    b = cpl.zeeman
    objective = [lasso_objective(cpl, x, eta)] if record_objective else []
    converged = False
    it = 0
    v, t_mom = x, 1.0
    for it in range(1, max_iters + 1):
        x_new = soft_threshold(v + step * (b - cpl.matvec(v)), step * eta, chi)
        diff = np.max(np.abs(x_new - x)) if x.size else 0.0
        if accelerate:
            if (v - x_new) @ (x_new - x) > 0:
                t_mom = 1.0
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            v = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
            t_mom = t_next
        else:
            v = x_new
        x = x_new
        if record_objective:
            objective.append(lasso_objective(cpl, x, eta))
        if diff < tol:
            converged = True
            break
    return IstaResult(x=x, converged=converged, iterations=it, objective=objective)


def ista_fixed_point_residual(problem, x, eta: float, chi) -> float:
    """``max |x - T_{chi,eta}(x + b - G x)|`` for the unit-step rule."""
    cpl = as_coupling(problem)
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x - soft_threshold(x + cpl.zeeman - cpl.matvec(x), eta, chi))))


# --- equality-constrained L1 ------------------------------------------------

@dataclass
class L1EqResult:
    x: np.ndarray
    converged: bool
    iterations: int
    feasibility: float


def solve_l1_equality(op, y, gamma_prime: float = 0.0, max_iters: int = 5000, tol: float = 1e-8, *,
                      analysis=None, synthesis=None, smooth=None, rho: float = 1.0,
                      x0=None) -> L1EqResult:
    """Minimize ``|Psi x|_1 + gamma' x^T L x`` subject to ``op.forward(x) = y``.

    Alternating-direction augmented Lagrangian iteration on the split
    ``w = Psi x``. The constraint is enforced exactly in every x-update
    through the projection ``x + op.adjoint(y - op.forward(x))``, which
    requires ``forward o adjoint`` to be the identity on the data space.

    Parameters
    ----------
    op : object with ``forward(x)`` and ``adjoint(d)``
        Observation operator with orthonormal rows.
    y : array
        Data, in the format returned by ``op.forward``.
    gamma_prime : float
        Weight of the quadratic smoothness term.
    max_iters, tol : stopping controls on the split residual and the
        relative change of ``x``.
    analysis, synthesis : callables, optional
        Orthonormal sparsifying transform ``Psi`` and its inverse; identity
        by default.
    smooth : callable, optional
        Applies the positive semi-definite smoothness matrix ``L``.
    rho : float
        Penalty parameter.
    x0 : array, optional

    Returns
    -------
    L1EqResult
    """
    analysis = analysis or (lambda v: v)
    synthesis = synthesis or (lambda v: v)

    def project(v):
        return v + op.adjoint(y - op.forward(v))

    def null_proj(v):
        return v - op.adjoint(op.forward(v))

    use_smooth = smooth is not None and gamma_prime > 0
    x = project(op.adjoint(y) if x0 is None else np.array(x0, dtype=float))
    shape = x.shape
    w = analysis(x)
    u = np.zeros_like(w)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        z = synthesis(w - u)
        if use_smooth:
            x_new = _smooth_x_step(project(z), z, rho, gamma_prime, smooth, null_proj, shape)
        else:
            x_new = project(z)
        px = analysis(x_new)
        w = np.sign(px + u) * np.maximum(np.abs(px + u) - 1.0 / rho, 0.0)
        split = px - w
        u = u + split
        scale = max(np.linalg.norm(x_new), 1e-30)
        change = np.linalg.norm(x_new - x) / scale
        x = x_new
        if np.linalg.norm(split) / scale < tol and change < tol:
            converged = True
            break
    feas = float(np.linalg.norm(y - op.forward(x)))
    return L1EqResult(x=x, converged=converged, iterations=it, feasibility=feas)


def _smooth_x_step(x0, z, rho, gamma_prime, smooth, null_proj, shape):
    """Minimize ``gamma' x^T L x + rho/2 |x - z|^2`` over the affine set through ``x0``."""
    n = x0.size

    def mv(d):
        d = null_proj(d.reshape(shape))
        return null_proj(2.0 * gamma_prime * smooth(d) + rho * d).ravel()

    rhs = null_proj(rho * (z - x0) - 2.0 * gamma_prime * smooth(x0)).ravel()
    opl = spla.LinearOperator((n, n), matvec=mv, dtype=float)
    # the operator is singular off the null space: an absolute floor keeps CG
    # from iterating on rounding noise there
    floor = 1e-13 * rho * max(np.linalg.norm(x0), 1.0)
    d, _ = spla.cg(opl, rhs, rtol=1e-10, atol=floor, maxiter=500)
    return x0 + null_proj(d.reshape(shape))
