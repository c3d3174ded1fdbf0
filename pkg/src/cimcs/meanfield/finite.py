"""Mean-field equations of the hybrid solver at finite saturation parameter.

The one-body steady state of a pulse is the density
``f(c, s) ~ exp(A (c b - V(c, s)))`` with ``A = 2 A_s^2 / (Xi_c + Xi_s + 0.5)``
and injection ``b = K (F(h) - eta)``; the field is ``h_m`` on the down branch
``c < 0`` and ``h_p`` on the up branch ``c > 0``, and the two branches share
one normalization. ``Xi_c`` and ``Xi_s`` are the second moments of that same
density, so every local field carries an inner fixed point.

Numerically, the down branch is reflected onto ``c > 0`` (field ``-b_m``),
the ``s`` integral is reduced to a tabulated one-dimensional factor, and the
``c`` integral uses Gauss-Legendre panels around the well. The switching
probability depends on ``h_p`` only once ``kappa`` is fixed, so it is
tabulated around its transitions and the outer Gaussian averages are written
as the noiseless-limit step moments plus a localized correction.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import expit, logsumexp

from ..cim import f_chi
from .core import MacroState, MeConfig, noise_std, solve_fixed_point
from .infinite import maxwell_threshold, step_moments
from .quadrature import SourceAverage, composite_legendre_rows, std_normal_pdf as phi

#: reduced noise coordinate range of the outer correction integral
Z_RANGE = 10.0
#: half-width of the tabulated switching window in transition widths
WINDOW = 60.0
#: panels of the outer correction integral
CORRECTION_PANELS = 32
INNER_TOL = 1e-13
INNER_MAX_ITERS = 200


def potential(c, s, p: float):
    """``V = (1-p) c^2/2 + (1+p) s^2/2 + c^2 s^2/2 + c^4/4 + s^4/4``."""
    c2, s2 = np.square(c), np.square(s)
    return 0.5 * (1.0 - p) * c2 + 0.5 * (1.0 + p) * s2 + 0.5 * c2 * s2 + 0.25 * (c2 * c2 + s2 * s2)


@lru_cache(maxsize=1)
def _amp_table():
    """``J_k(eps) = int u^k exp(-u^2/2 - eps u^4) du`` for k = 0, 2 on a log-eps grid."""
    u = np.linspace(-14.0, 14.0, 4097)
    du = u[1] - u[0]
    log_eps = np.linspace(-40.0, 3.0, 1721)
    g = np.exp(-0.5 * u * u - np.exp(log_eps)[:, None] * u ** 4) * du
    return log_eps, g.sum(axis=1), (g * u * u).sum(axis=1)


def _amp_factors(eps):
    log_eps, j0, j2 = _amp_table()
    le = np.log(eps)
    small = le < log_eps[0]
    r = math.sqrt(2.0 * math.pi)
    out0 = np.where(small, r * (1.0 - 3.0 * eps), np.interp(le, log_eps, j0))
    out2 = np.where(small, r * (1.0 - 15.0 * eps), np.interp(le, log_eps, j2))
    return out0, out2


def _largest_root(b, p: float):
    """Largest real root of ``c^3 + (1-p) c - b`` (Newton from the right)."""
    c = 1.0 + math.sqrt(max(p - 1.0, 0.0)) + np.cbrt(np.abs(b))
    for _ in range(100):
        f = c ** 3 + (1.0 - p) * c - b
        step = f / (3.0 * c * c + (1.0 - p))
        c = c - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(np.abs(c), 1.0)):
            break
    return c


def _two_branch(b_up, b_down, as2: float, p: float, order: int, s_init=None):
    """Inner fixed point of ``S = Xi_c + Xi_s`` for the jointly normalized density.

    ``b_down`` is the injection on the down branch before reflection.
    Returns ``(xi_c, xi_s, up_prob, log_odds, converged)``.
    """
    b_up = np.atleast_1d(np.asarray(b_up, dtype=float))
    b_dn = -np.atleast_1d(np.asarray(b_down, dtype=float))
    b_up, b_dn = np.broadcast_arrays(b_up, b_dn)
    s = np.full(b_up.shape, max(p - 1.0, 0.0)) if s_init is None else np.array(s_init, dtype=float)
    converged = False
    for _ in range(INNER_MAX_ITERS):
        amp = 2.0 * as2 / (s + 0.5)
        xi_c, xi_s, _, _ = _branch_pass(b_up, b_dn, amp, p, order)
        new = xi_c + xi_s
        done = np.max(np.abs(new - s)) < INNER_TOL
        s = new
        if done:
            converged = True
            break
    amp = 2.0 * as2 / (s + 0.5)
    xi_c, xi_s, up, odds = _branch_pass(b_up, b_dn, amp, p, order)
    return xi_c, xi_s, up, odds, converged


def _branch_pass(b_up, b_dn, amp, p, order):
    amp = np.broadcast_to(np.asarray(amp, dtype=float), b_up.shape)
    lz_u, c2_u, s2_u = _one_sided(b_up, amp, p, order)
    lz_d, c2_d, s2_d = _one_sided(b_dn, amp, p, order)
    odds = lz_u - lz_d
    up, dn = expit(odds), expit(-odds)
    return up * c2_u + dn * c2_d, up * s2_u + dn * s2_d, up, odds


def _one_sided(b, amp, p: float, order: int):
    """Log-normalizer and moments of ``exp(amp (c b - V))`` over ``c > 0``, all ``s``.

    ``amp`` is given per entry of ``b``. Returns ``(log Z, <c^2>, <s^2>)``.
    """
    root = _largest_root(b, p)
    interior = root > 0
    cstar = np.where(interior, root, 0.0)
    curv = 3.0 * cstar ** 2 + (1.0 - p)
    with np.errstate(divide="ignore"):
        w = np.minimum(2.0 * amp ** -0.25,
                       np.where(curv > 0, 1.0 / np.sqrt(amp * np.maximum(curv, 1e-300)), np.inf))
        w = np.minimum(w, np.where(~interior & (b < 0), 1.0 / (amp * np.abs(b)), np.inf))
    lo = np.maximum(cstar - 12.0 * w, 0.0)
    hi = cstar + np.where(interior, 12.0, 40.0) * w
    t = np.linspace(0.0, 1.0, 5)
    u = np.linspace(0.0, 1.0, 9)
    breaks = np.concatenate([lo[:, None] * t, lo[:, None] + (hi - lo)[:, None] * u[1:]], axis=1)
    c, wt = composite_legendre_rows(breaks, order)
    c2 = c * c
    a2 = amp[:, None]
    width = 1.0 + p + c2
    j0, j2 = _amp_factors(1.0 / (4.0 * a2 * width * width))
    log_s = -0.5 * np.log(a2 * width) + np.log(j0)
    # exponent expanded about cstar: the amplitude scale can reach 1e8
    d = c - cstar[:, None]
    c0 = cstar[:, None]
    slope = c0 ** 3 + (1.0 - p) * c0 - b[:, None]
    excess = slope * d + 0.5 * (3.0 * c0 * c0 + 1.0 - p) * d * d + c0 * d ** 3 + 0.25 * d ** 4
    peak = amp * (cstar * b - 0.5 * (1.0 - p) * cstar ** 2 - 0.25 * cstar ** 4)
    expo = -a2 * excess + log_s
    with np.errstate(divide="ignore"):
        logw = np.log(wt) + expo
    log_z = logsumexp(logw, axis=1)
    prob = np.exp(logw - log_z[:, None])
    s2 = j2 / (j0 * a2 * width)
    return log_z + peak, np.sum(prob * c2, axis=1), np.sum(prob * s2, axis=1)


def branch_density_moments(h_p, h_m, cfg: MeConfig, *, return_converged: bool = False):
    """Self-consistent moments of the two-branch one-body density.

    Parameters
    ----------
    h_p, h_m : float or array_like
        Local fields of the up (``c > 0``) and down (``c < 0``) branches.
    cfg : MeConfig
        Supplies ``as2``, ``p_pump``, ``k_tilde``, ``eta``, ``chi`` and the
        amplitude quadrature order.

    Returns
    -------
    xi_c, xi_s, up_prob : ndarray
        ``<c^2>``, ``<s^2>`` and the probability of the up branch. With
        ``return_converged`` a fourth item reports the inner fixed point.
    """
    if not math.isfinite(cfg.as2):
        raise ValueError("branch_density_moments needs a finite as2")
    b_p = cfg.k_tilde * (f_chi(h_p, cfg.chi) - cfg.eta)
    b_m = cfg.k_tilde * (f_chi(h_m, cfg.chi) - cfg.eta)
    xi_c, xi_s, up, _, ok = _two_branch(b_p, b_m, cfg.as2, cfg.p_pump, cfg.quad.c_order)
    if np.ndim(h_p) == 0 and np.ndim(h_m) == 0:
        xi_c, xi_s, up = float(xi_c[0]), float(xi_s[0]), float(up[0])
    return (xi_c, xi_s, up, ok) if return_converged else (xi_c, xi_s, up)


def transition_width(cfg: MeConfig, kappa: float) -> float:
    """Width in ``h`` over which the up-branch probability switches."""
    s0 = max(cfg.p_pump - 1.0, 0.0)
    slope = (2.0 * cfg.as2 / (s0 + 0.5)) * math.sqrt(max(cfg.p_pump - 1.0, 0.05)) * cfg.k_tilde
    return 1.0 / (slope * (1.0 + 1.0 / kappa))


class SwitchTable:
    """Up-branch probability minus the Maxwell step near its transition.

    The log-odds of the two branches is smooth in ``h`` (nearly linear), so it
    is tabulated and interpolated; the probability itself switches over the
    much shorter ``width``. For the signed output the table is in ``|h|``.
    """

    def __init__(self, cfg: MeConfig, kappa: float, theta: float):
        self.signed = cfg.signed
        self.chi = cfg.chi
        self.theta = theta
        self.width = transition_width(cfg, kappa)
        half = WINDOW * self.width
        lo, hi = theta - half, theta + half
        if self.signed:
            lo = max(lo, 0.0)
        self.lo, self.hi = lo, hi
        self.h = np.linspace(lo, hi, cfg.quad.h_grid)
        *_, self.log_odds, self.converged = _two_branch(
            cfg.k_tilde * (f_chi(self.h, cfg.chi) - cfg.eta),
            cfg.k_tilde * (f_chi(self.h / kappa, cfg.chi) - cfg.eta),
            cfg.as2, cfg.p_pump, cfg.quad.c_order)

    def intervals(self):
        """Integration pieces in ``h``, split where the step jumps."""
        pieces = [(self.lo, self.theta), (self.theta, self.hi)]
        if self.signed:
            pieces += [(-b, -a) for a, b in pieces]
        return [(a, b) for a, b in pieces if b > a]

    def __call__(self, h):
        key = np.abs(h) if self.signed else h
        inside = (key >= self.lo) & (key <= self.hi)
        up = expit(np.interp(key, self.h, self.log_odds))
        return np.where(inside, up - (f_chi(h, self.chi) > self.theta), 0.0)


def _correction(table: SwitchTable, m, s: float, order: int):
    """Gaussian averages of ``delta(h)`` times ``(h, h^2, z h / s)`` per mean ``m``."""
    out = np.zeros((3, m.size))
    u = np.linspace(0.0, 1.0, CORRECTION_PANELS + 1)
    for lo, hi in table.intervals():
        zl = np.clip((lo - m) / s, -Z_RANGE, Z_RANGE)
        zh = np.clip((hi - m) / s, -Z_RANGE, Z_RANGE)
        live = zh > zl
        if not np.any(live):
            continue
        breaks = zl[live, None] + (zh - zl)[live, None] * u
        z, wz = composite_legendre_rows(breaks, order)
        h = m[live, None] + s * z
        g = wz * phi(z) * table(h) * h
        out[0, live] += g.sum(axis=1)
        out[1, live] += (g * h).sum(axis=1)
        out[2, live] += (g * z).sum(axis=1) / s
    return out


def finite_update(cfg: MeConfig, avg: SourceAverage | None = None, *, stats: dict | None = None):
    """Right-hand side ``(R, Q, U) -> (R', Q', U')`` at finite saturation."""
    avg = avg or SourceAverage(cfg.dist, cfg.quad.x_order, cfg.quad.x_panels)
    signed = cfg.signed
    zero_w = (1.0 - cfg.a) / cfg.a
    stats = {} if stats is None else stats
    stats.setdefault("clamped", 0)
    stats.setdefault("inner_failures", 0)

    def update(r, q, u):
        if q + cfg.x2 - 2.0 * r < 0:
            stats["clamped"] += 1
        s = noise_std(cfg, r, q)
        kappa = 1.0 + (cfg.a / cfg.alpha) * max(u, 0.0)
        theta = maxwell_threshold(cfg.eta, kappa)
        table = SwitchTable(cfg, kappa, theta)
        if not table.converged:
            stats["inner_failures"] += 1
        kinks = (theta, -theta) if signed else (theta,)
        x, w = avg.rule(kinks, (s, table.width))
        m = np.concatenate([x, [0.0]])
        wt = np.concatenate([w, [zero_w]])
        _, e1, e2, eu = step_moments(m, s, theta, signed)
        corr = _correction(table, m, s, cfg.quad.z_order)
        return (float(wt @ (m * (e1 + corr[0]))),
                float(wt @ (e2 + corr[1])),
                float(wt @ (eu + corr[2])))

    return update


def solve_me_finite_as(cfg: MeConfig, *, raise_on_fail: bool = False) -> MacroState:
    """Solve the finite-saturation equations by damped fixed-point iteration.

    The pump is held at its steady value ``cfg.p_pump``.
    """
    if not math.isfinite(cfg.as2):
        raise ValueError("solve_me_finite_as needs a finite as2; use solve_me_infinite_as")
    return solve_fixed_point(finite_update(cfg), cfg, raise_on_fail=raise_on_fail)
