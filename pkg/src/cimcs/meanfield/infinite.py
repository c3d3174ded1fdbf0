"""Mean-field equations of the hybrid solver in the noiseless-amplitude limit.

In this limit the one-body output is the Maxwell-rule step
``X = H(F(h_p) + F(h_m) - 2 eta)`` with ``h_m = h_p / kappa`` and
``kappa = 1 + (a/alpha) U``, which reduces to ``H(F(h_p) - theta)`` with
``theta = 2 eta / (1 + 1/kappa)``. With ``h_p = m + s z`` and ``z`` standard
normal, every Gaussian average is a truncated-normal moment in closed form.
"""

from __future__ import annotations

import numpy as np

from .core import MacroState, MeConfig, noise_std, solve_fixed_point
from .quadrature import SourceAverage, std_normal_cdf as Phi, std_normal_pdf as phi


def step_moments(m, s: float, theta: float, signed: bool):
    """Gaussian averages over ``z`` of the step output ``X = H(F(m + s z) - theta)``.

    Returns ``(E[X], E[h X], E[h^2 X], E[z h X] / s)`` with ``h = m + s z``.
    """
    m = np.asarray(m, dtype=float)
    lu = (theta - m) / s
    pu, du = Phi(-lu), phi(lu)
    e0 = pu
    e1 = m * pu + s * du
    e2 = m * m * pu + 2.0 * m * s * du + s * s * (pu + lu * du)
    eu = pu + (theta / s) * du
    if signed:
        ll = (-theta - m) / s
        pl, dl = Phi(ll), phi(ll)
        e0 = e0 + pl
        e1 = e1 + m * pl - s * dl
        e2 = e2 + m * m * pl - 2.0 * m * s * dl + s * s * (pl - ll * dl)
        eu = eu + pl + (theta / s) * dl
    return e0, e1, e2, eu


def maxwell_threshold(eta: float, kappa: float) -> float:
    """Threshold on ``F(h_p)`` equivalent to ``F(h_p) + F(h_p/kappa) > 2 eta``."""
    return 2.0 * eta / (1.0 + 1.0 / kappa)


def infinite_update(cfg: MeConfig, avg: SourceAverage | None = None):
    """Right-hand side ``(R, Q, U) -> (R', Q', U')`` of the noiseless-limit equations."""
    avg = avg or SourceAverage(cfg.dist, cfg.quad.x_order, cfg.quad.x_panels)
    signed = cfg.signed
    zero_w = (1.0 - cfg.a) / cfg.a

    def update(r, q, u):
        s = noise_std(cfg, r, q)
        kappa = 1.0 + (cfg.a / cfg.alpha) * max(u, 0.0)
        theta = maxwell_threshold(cfg.eta, kappa)
        kinks = (theta, -theta) if signed else (theta,)
        x, w = avg.rule(kinks, (s,))
        _, e1, e2, eu = step_moments(x, s, theta, signed)
        _, _, z2, zu = step_moments(0.0, s, theta, signed)
        r_new = float(w @ (x * e1))
        q_new = float(w @ e2) + zero_w * float(z2)
        u_new = float(w @ eu) + zero_w * float(zu)
        return r_new, q_new, u_new

    return update


def solve_me_infinite_as(cfg: MeConfig, *, raise_on_fail: bool = False) -> MacroState:
    """Solve the noiseless-limit equations by damped fixed-point iteration."""
    return solve_fixed_point(infinite_update(cfg), cfg, raise_on_fail=raise_on_fail)
