"""Evaluation metrics: RMSE, support direction cosine, energy, one-sided KS."""

from __future__ import annotations

import math

import numpy as np


def rmse(r, sigma, x_true, xi_true) -> float:
    """Root-mean-square error between ``sigma*r`` and ``xi*x``."""
    r, sigma, x_true, xi_true = (np.asarray(v, dtype=float) for v in (r, sigma, x_true, xi_true))
    if not (r.shape == sigma.shape == x_true.shape == xi_true.shape):
        raise ValueError("rmse: length mismatch")
    if r.size == 0:
        raise ValueError("rmse: empty vectors")
    diff = sigma * r - xi_true * x_true
    return math.sqrt(float(diff @ diff) / r.size)


def direction_cosine(xi_true, sigma) -> float:
    """Normalized overlap ``sum(xi*sigma) / sqrt(sum(xi) * sum(sigma))``.

    Two all-zero vectors agree perfectly and give 1; if exactly one of them is
    all-zero the value is 0.
    """
    xi = np.asarray(xi_true) != 0
    sg = np.asarray(sigma) != 0
    if xi.shape != sg.shape:
        raise ValueError("direction_cosine: length mismatch")
    nx, ns = int(xi.sum()), int(sg.sum())
    if nx == 0 and ns == 0:
        return 1.0
    if nx == 0 or ns == 0:
        return 0.0
    return int(np.count_nonzero(xi & sg)) / math.sqrt(nx * ns)


def hamiltonian(inst, r, sigma, lam: float) -> float:
    """L0-regularized energy of ``(sigma, r)`` on an instance.

    ``1/2 |A(sigma*r)|^2 - y^T A(sigma*r) + lam * |sigma|_0``.
    """
    from .cdp import residual_energy

    return residual_energy(inst, r, sigma, lam)


def ks_one_sided(sample_a, sample_b) -> tuple[float, float]:
    """One-sided two-sample Kolmogorov-Smirnov test.

    Tests whether ``sample_a`` is stochastically larger than ``sample_b``.
    The statistic is ``D = max(0, sup_x F_b(x) - F_a(x))`` over the empirical
    CDFs and the p-value is the asymptotic ``exp(-2 m n D^2 / (m + n))``.
    """
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    m, n = a.size, b.size
    if m == 0 or n == 0:
        raise ValueError("ks_one_sided: empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / m
    fb = np.searchsorted(b, grid, side="right") / n
    stat = max(0.0, float(np.max(fb - fa)))
    p = math.exp(-2.0 * m * n * stat * stat / (m + n))
    return stat, min(1.0, p)
