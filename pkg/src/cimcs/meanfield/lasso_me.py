"""Mean-field equations of the soft-thresholding (LASSO) estimator.

The effective output is ``T(h_p) = h_p - kappa eta`` above the threshold
``kappa eta`` (and ``h_p + kappa eta`` below ``-kappa eta`` in the signed case),
with ``kappa = 1 + (a/alpha) U``. The susceptibility equation is written
through Gaussian integration by parts: ``U = <P(active)>_{x,xi} / a``.
"""

from __future__ import annotations

import numpy as np

from .core import MacroState, MeConfig, noise_std, solve_fixed_point
from .quadrature import SourceAverage, std_normal_cdf as Phi, std_normal_pdf as phi


def soft_moments(m, s: float, tau: float, signed: bool):
    """Gaussian averages over ``z`` of the soft-threshold output at level ``tau``.

    Returns ``(P(active), E[T], E[T^2])`` with ``h = m + s z``.
    """
    m = np.asarray(m, dtype=float)
    lu = (tau - m) / s
    pu, du = Phi(-lu), phi(lu)
    d = m - tau
    p = pu
    e1 = d * pu + s * du
    e2 = d * d * pu + 2.0 * d * s * du + s * s * (pu + lu * du)
    if signed:
        ll = (-tau - m) / s
        pl, dl = Phi(ll), phi(ll)
        d2 = m + tau
        p = p + pl
        e1 = e1 + d2 * pl - s * dl
        e2 = e2 + d2 * d2 * pl - 2.0 * d2 * s * dl + s * s * (pl - ll * dl)
    return p, e1, e2


def lasso_update(cfg: MeConfig, avg: SourceAverage | None = None):
    avg = avg or SourceAverage(cfg.dist, cfg.quad.x_order, cfg.quad.x_panels)
    signed = cfg.signed
    zero_w = (1.0 - cfg.a) / cfg.a

    def update(r, q, u):
        s = noise_std(cfg, r, q)
        kappa = 1.0 + (cfg.a / cfg.alpha) * max(u, 0.0)
        tau = kappa * cfg.eta
        kinks = (tau, -tau) if signed else (tau,)
        x, w = avg.rule(kinks, (s,))
        p, e1, e2 = soft_moments(x, s, tau, signed)
        p0, _, z2 = soft_moments(0.0, s, tau, signed)
        return (float(w @ (x * e1)),
                float(w @ e2) + zero_w * float(z2),
                float(w @ p) + zero_w * float(p0))

    return update


def solve_me_lasso(cfg: MeConfig, *, raise_on_fail: bool = False) -> MacroState:
    """Solve the LASSO equations by damped fixed-point iteration."""
    return solve_fixed_point(lasso_update(cfg), cfg, raise_on_fail=raise_on_fail)
