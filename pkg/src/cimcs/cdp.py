"""Signal-value subproblem: minimize the energy over ``r`` with the support fixed."""

from __future__ import annotations

import numpy as np

from .coupling import DenseCoupling, RankDeficiencyError, as_coupling, least_squares_support


def _support(sigma, n: int) -> np.ndarray:
    sigma = np.asarray(sigma)
    if sigma.shape != (n,):
        raise ValueError(f"support vector has shape {sigma.shape}, expected ({n},)")
    return np.flatnonzero(sigma)


def solve_signal(problem, sigma, *, fallback: bool = False) -> np.ndarray:
    """Energy-minimizing signal values for the support ``sigma``.

    Solves the support-restricted normal equations ``G_SS r_S = b_S`` and
    returns ``r`` with exact zeros off the support.

    Parameters
    ----------
    problem : Instance or Coupling
    sigma : array of {0, 1}
    fallback : bool
        On a rank-deficient support, return the minimum-norm least-squares
        solution instead of raising. Only available for dense couplings.

    Raises
    ------
    RankDeficiencyError
        If the support is larger than the number of observations or its Gram
        matrix is numerically singular (and ``fallback`` is False).
    """
    cpl = as_coupling(problem)
    idx = _support(sigma, cpl.n)
    r = np.zeros(cpl.n)
    if idx.size == 0:
        return r
    try:
        r[idx] = cpl.solve_support(idx)
    except RankDeficiencyError:
        if not fallback or not isinstance(cpl, DenseCoupling):
            raise
        r[idx] = least_squares_support(cpl.a_mat, cpl.y, idx)
    return r


def residual_energy(problem, r, sigma, lam: float) -> float:
    """Energy ``1/2 (s*r)^T G (s*r) - b^T (s*r) + lam |s|_0``."""
    cpl = as_coupling(problem)
    sigma = np.asarray(sigma)
    rs = np.asarray(r, dtype=float) * (sigma != 0)
    return cpl.energy(rs, sigma, lam)


def energy_gradient(problem, r, sigma) -> np.ndarray:
    """Gradient of the energy with respect to ``r``: ``sigma * (G (sigma*r) - b)``."""
    cpl = as_coupling(problem)
    mask = (np.asarray(sigma) != 0).astype(float)
    rs = np.asarray(r, dtype=float) * mask
    return mask * (cpl.matvec(rs) - cpl.zeeman)
