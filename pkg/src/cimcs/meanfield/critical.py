"""Criticality: discontinuity scans, perturbative stability, and optimal thresholds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from ..problem import Kind
from .core import Branch, MacroState, MeConfig
from .quadrature import SourceAverage, std_normal_cdf as Phi, std_normal_pdf as phi

Solver = Callable[[MeConfig], MacroState]


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class CriticalPoint:
    a_c: float
    rmse_at_c: float
    rmse_after: float


def _rmse(state: MacroState) -> float:
    return state.rmse if state.converged else math.inf


def critical_point_scan(solver: Solver, cfg: MeConfig, a_grid, direction=Direction.UP, *,
                        jump: float = 0.05, resolution: float = 1e-3) -> CriticalPoint | None:
    """Locate the sparseness at which the solution jumps to another branch.

    The solver is swept along ``a_grid`` in the given direction, each solve
    warm-started from the previous solution. The first step whose RMSE
    changes by more than ``jump`` is bisected (always continuing from the
    state before the jump) until the bracket is narrower than ``resolution``.
    If the change is still larger than ``jump`` across the final bracket it
    is a discontinuity; otherwise the grid step only straddled a steep but
    continuous rise and the sweep goes on.

    Returns
    -------
    CriticalPoint or None
        ``a_c`` is the last sparseness still on the starting branch and
        ``rmse_at_c`` its RMSE; None if no discontinuity occurs on the grid.
        A solve that fails to converge counts as an infinite RMSE.
    """
    grid = np.sort(np.asarray(a_grid, dtype=float))
    if Direction(direction) is Direction.DOWN:
        grid = grid[::-1]
    prev_a, prev = None, None
    for a in grid:
        init = prev if prev is not None else cfg.init
        state = solver(replace(cfg, a=float(a), init=init))
        if prev is not None and not abs(_rmse(state) - _rmse(prev)) <= jump:
            crit, st_hi = _bisect(solver, cfg, prev_a, prev, float(a), state, jump, resolution)
            if not abs(crit.rmse_after - crit.rmse_at_c) <= jump:
                return crit
            # continuous: resume from the branch followed through the bracket
            state = solver(replace(cfg, a=float(a), init=st_hi))
        if state.converged:
            prev_a, prev = float(a), state
        elif prev is None:
            continue
    return None


def _bisect(solver, cfg, a_lo, st_lo, a_hi, st_hi, jump, resolution):
    while abs(a_hi - a_lo) > resolution:
        mid = 0.5 * (a_lo + a_hi)
        st = solver(replace(cfg, a=mid, init=st_lo))
        if abs(_rmse(st) - _rmse(st_lo)) <= jump:
            a_lo, st_lo = mid, st
        else:
            a_hi, st_hi = mid, st
    if abs(_rmse(st_hi) - _rmse(st_lo)) <= jump:
        return CriticalPoint(a_lo, st_lo.rmse, _rmse(st_hi)), st_hi
    # re-solve the upper end from the lower one: a jump seen only from the
    # coarse warm start is not a discontinuity of the followed branch
    st = solver(replace(cfg, a=a_hi, init=st_lo))
    return CriticalPoint(a_lo, st_lo.rmse, _rmse(st)), st


class Stability(str, enum.Enum):
    STABLE = "stable"
    NEUTRAL = "neutral"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class PerturbationResult:
    w_coeff: float
    classification: Stability
    reliable: bool

    @property
    def stable(self) -> bool:
        return self.classification is Stability.STABLE


def _w_map(cfg: MeConfig, zeta: float, w: float, avg: SourceAverage) -> float:
    """Scaled error map ``w -> (W' + <x^2>) / zeta^6`` at ``W = -<x^2> + zeta^6 w``.

    ``W' = s^2 (1/a) E[z^2 X] - (1/a) E[x^2 xi X]`` with ``s^2 = (a/alpha)|W + <x^2>|``
    and the step output ``X = H(F(h_p) - zeta^2)``.
    """
    scale = zeta ** 6
    s = math.sqrt((cfg.a / cfg.alpha) * scale * abs(w))
    theta = zeta * zeta
    signed = cfg.signed
    kinks = (theta, -theta) if signed else (theta,)
    x, wt = avg.rule(kinks, (s,))

    def moments(m):
        lu = (theta - m) / s
        p, z2 = Phi(-lu), Phi(-lu) + lu * phi(lu)
        if signed:
            ll = (-theta - m) / s
            p = p + Phi(ll)
            z2 = z2 + Phi(ll) - ll * phi(ll)
        return p, z2

    p1, z2_1 = moments(x)
    _, z2_0 = moments(0.0)
    active = (wt @ z2_1) + (1.0 - cfg.a) / cfg.a * float(z2_0)
    missed = wt @ (x * x * (1.0 - p1))
    return float((s * s * active + missed) / scale)


def perturbation_check(cfg: MeConfig, zeta: float = 0.1, *, tol: float = 0.05) -> PerturbationResult:
    """Stability of the perfect-reconstruction solution under a small error.

    The error map of the noiseless-limit equations is evaluated at an error
    of order ``zeta^6`` (noise ``s ~ zeta^3`` well below the threshold
    ``zeta^2``). Its slope in the scaled error is the growth factor of a
    perturbation: below ``1 - tol`` the solution is stable, above ``1 + tol``
    unstable, otherwise neutral. The slope is recomputed at ``zeta/2``;
    disagreement beyond ``tol/4`` marks the result unreliable (``zeta`` too
    large for the expansion).
    """
    if cfg.beta != 0:
        raise ValueError("the perturbation expansion assumes beta = 0")
    if cfg.dist.kind in (Kind.GAMMA, Kind.BILATERAL_GAMMA) and cfg.dist.k < 1:
        raise ValueError("source density must be finite at the origin")
    if not 0 < zeta < 0.5:
        raise ValueError("zeta must be small")
    avg = SourceAverage(cfg.dist, cfg.quad.x_order, cfg.quad.x_panels)

    def slope(zt):
        return _w_map(cfg, zt, 2.0, avg) - _w_map(cfg, zt, 1.0, avg)

    k1, k2 = slope(zeta), slope(0.5 * zeta)
    reliable = abs(k1 - k2) <= 0.25 * tol
    if k2 < 1.0 - tol:
        cls = Stability.STABLE
    elif k2 > 1.0 + tol:
        cls = Stability.UNSTABLE
    else:
        cls = Stability.NEUTRAL
    return PerturbationResult(k2, cls, reliable)


@dataclass(frozen=True)
class EtaOptimum:
    eta: float
    rmse: float
    state: MacroState


def grid_search_optimal_eta(solver: Solver, cfg: MeConfig, eta_range=(0.002, 0.5), *,
                            n_grid: int = 48, refine: bool = True) -> EtaOptimum:
    """Threshold minimizing the converged RMSE over a logarithmic grid.

    Every threshold starts from the near-zero initialization. The best grid
    point is refined by a bounded search in ``log(eta)`` between its
    neighbours.

    Raises
    ------
    RuntimeError
        If no grid point converges.
    """
    lo, hi = float(eta_range[0]), float(eta_range[1])
    if not 0 < lo <= hi:
        raise ValueError("need 0 < eta_min <= eta_max")
    base = replace(cfg, init=Branch.NEAR_ZERO)
    if lo == hi:
        st = solver(replace(base, eta=lo))
        if not st.converged:
            raise RuntimeError(f"no convergence at eta={lo}")
        return EtaOptimum(lo, st.rmse, st)
    etas = np.geomspace(lo, hi, n_grid)
    results = []
    for eta in etas:
        st = solver(replace(base, eta=float(eta)))
        results.append(st.rmse if st.converged else math.inf)
    results = np.array(results)
    if not np.any(np.isfinite(results)):
        raise RuntimeError("no threshold on the grid converged")
    k = int(np.argmin(results))
    best_eta, best = float(etas[k]), float(results[k])
    if refine and 0 < k < n_grid - 1:
        def obj(log_eta):
            st = solver(replace(base, eta=math.exp(log_eta)))
            return st.rmse if st.converged else math.inf

        res = minimize_scalar(obj, bounds=(math.log(etas[k - 1]), math.log(etas[k + 1])),
                              method="bounded", options={"xatol": 1e-4})
        if res.fun < best:
            best_eta, best = math.exp(res.x), float(res.fun)
    st = solver(replace(base, eta=best_eta))
    return EtaOptimum(best_eta, st.rmse, st)
