"""Exact-recovery thresholds of L0 and L1 minimization in the large-system limit."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from ..problem import Chi
from .quadrature import std_normal_cdf as Phi, std_normal_pdf as phi


def l0_threshold(alpha: float) -> float:
    """Largest sparseness recoverable by L0 minimization: ``a_th = alpha``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return float(alpha)


def _kappa(chi) -> float:
    return 2.0 if Chi.parse(chi) is Chi.SIGNED else 1.0


def weak_threshold_objective(z, alpha: float, chi):
    """``alpha * (1 - (k/alpha) G(z)) / (1 + z^2 - k G(z))`` with ``G = (1+z^2) Phi(-z) - z phi(z)``."""
    z = np.asarray(z, dtype=float)
    k = _kappa(chi)
    g = (1.0 + z * z) * Phi(-z) - z * phi(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = alpha * (1.0 - (k / alpha) * g) / (1.0 + z * z - k * g)
    # the signed denominator vanishes at z = 0
    return np.where(np.isfinite(val), val, -np.inf)


def l1_weak_threshold(alpha: float, chi) -> float:
    """Weak threshold of L1 minimization (``k = 1`` non-negative, ``k = 2`` signed).

    Maximizes the objective over ``z >= 0`` on a coarse grid over ``[0, 10]``
    and refines the best bracket with a bounded scalar search.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    grid = np.linspace(0.0, 10.0, 2001)
    vals = weak_threshold_objective(grid, alpha, chi)
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda z: -float(weak_threshold_objective(z, alpha, chi)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(max(-res.fun, vals[k]))
