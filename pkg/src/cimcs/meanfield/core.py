"""Order parameters, solver configuration and the damped fixed-point driver."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..problem import Chi, SourceDistribution, second_moment


class Branch(str, enum.Enum):
    NEAR_ZERO = "near_zero"
    NON_ZERO = "non_zero"


class MeConvergenceError(RuntimeError):
    """Fixed-point iteration did not converge."""


@dataclass(frozen=True)
class MacroState:
    """Order parameters: overlap ``R``, mean-square magnetization ``Q``, susceptibility ``U``."""

    r_overlap: float
    q_mag: float
    u_susc: float
    a: float = 1.0
    x2: float = 1.0
    branch: Branch = Branch.NEAR_ZERO
    converged: bool = True
    iterations: int = 0

    @property
    def w(self) -> float:
        return self.q_mag - 2.0 * self.r_overlap

    @property
    def rmse(self) -> float:
        return math.sqrt(max(self.a * (self.q_mag - 2.0 * self.r_overlap + self.x2), 0.0))

    def as_tuple(self) -> tuple[float, float, float]:
        return self.r_overlap, self.q_mag, self.u_susc


@dataclass(frozen=True)
class FixedPointSpec:
    damping: float = 0.5
    tol: float = 1e-10
    max_iters: int = 5000

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature resolution.

    ``x_order``: Gauss-Legendre nodes per source-value panel.
    ``x_panels``: uniform source-value panels before kink refinement.
    ``z_order``: Gauss-Legendre nodes per noise panel (finite A_s).
    ``c_order``: nodes per amplitude panel in the one-body density.
    ``h_grid``: points of the tabulated branch log-odds (finite A_s).
    """

    x_order: int = 16
    x_panels: int = 24
    z_order: int = 12
    c_order: int = 10
    h_grid: int = 201

    def __post_init__(self):
        if min(self.x_order, self.z_order, self.c_order) < 8:
            raise ValueError("quadrature orders must be >= 8")

    def doubled(self) -> "QuadratureSpec":
        return replace(self, x_order=2 * self.x_order, z_order=2 * self.z_order,
                       c_order=2 * self.c_order, h_grid=2 * self.h_grid - 1)


@dataclass(frozen=True)
class MeConfig:
    alpha: float
    a: float
    eta: float
    dist: SourceDistribution = field(default_factory=SourceDistribution)
    beta: float = 0.0
    chi: Chi | None = None
    as2: float = math.inf
    p_pump: float = 1.5
    k_tilde: float = 0.25
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    fp: FixedPointSpec = field(default_factory=FixedPointSpec)
    init: Branch | MacroState = Branch.NEAR_ZERO

    def __post_init__(self):
        chi = self.dist.chi if self.chi is None else Chi.parse(self.chi)
        object.__setattr__(self, "chi", chi)
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 < self.a <= 1:
            raise ValueError(f"a must be in (0, 1], got {self.a}")
        if self.eta < 0 or self.beta < 0:
            raise ValueError("eta and beta must be >= 0")
        if not self.as2 > 0:
            raise ValueError("as2 must be positive (math.inf for the noiseless limit)")

    @property
    def x2(self) -> float:
        return second_moment(self.dist)

    @property
    def signed(self) -> bool:
        return self.chi is Chi.SIGNED

    def initial_state(self) -> MacroState:
        if isinstance(self.init, MacroState):
            s = self.init
            return replace(s, a=self.a, x2=self.x2)
        if Branch(self.init) is Branch.NEAR_ZERO:
            return MacroState(self.x2, self.x2, 1.0, self.a, self.x2, Branch.NEAR_ZERO)
        return MacroState(1e-6, 1e-6, 1.0, self.a, self.x2, Branch.NON_ZERO)

    def with_(self, **kw) -> "MeConfig":
        return replace(self, **kw)


#: smallest noise standard deviation used in the one-body fields
S_FLOOR = 1e-12
#: Q above this multiple of <x^2> is treated as a divergent iteration
DIVERGENCE_CAP = 1e6


def noise_std(cfg: MeConfig, r: float, q: float) -> float:
    """``sqrt(beta^2 + (a/alpha)(Q + <x^2> - 2R))``, radicand clamped at 0."""
    rad = cfg.beta ** 2 + (cfg.a / cfg.alpha) * (q + cfg.x2 - 2.0 * r)
    return max(math.sqrt(max(rad, 0.0)), S_FLOOR)


def solve_fixed_point(update, cfg: MeConfig, *, raise_on_fail: bool = False) -> MacroState:
    """Damped iteration ``v <- (1-d) v + d F(v)`` on ``v = (R, Q, U)``.

    Stops when the sup-norm of ``F(v) - v`` is below ``cfg.fp.tol``.
    """
    st = cfg.initial_state()
    v = np.array(st.as_tuple(), dtype=float)
    d = cfg.fp.damping
    converged = False
    it = 0
    cap = DIVERGENCE_CAP * max(cfg.x2, 1.0)
    for it in range(1, cfg.fp.max_iters + 1):
        new = np.asarray(update(*v), dtype=float)
        if not np.all(np.isfinite(new)) or abs(new[1]) > cap:
            # magnetization grows without bound (support larger than the data allow)
            break
        step = np.max(np.abs(new - v))
        v = (1.0 - d) * v + d * new
        v[2] = max(v[2], 0.0)
        if step < cfg.fp.tol:
            converged = True
            break
    if not converged and raise_on_fail:
        raise MeConvergenceError(f"no convergence after {it} iterations at a={cfg.a}, alpha={cfg.alpha}")
    state = MacroState(float(v[0]), float(v[1]), float(v[2]), cfg.a, cfg.x2, Branch.NEAR_ZERO,
                       converged, it)
    return replace(state, branch=classify_branch(state))


def classify_branch(state: MacroState, threshold: float = 0.1) -> Branch:
    """Label a state by its relative error ``rmse / sqrt(a <x^2>)``."""
    scale = math.sqrt(max(state.a * state.x2, 1e-300))
    return Branch.NEAR_ZERO if state.rmse / scale < threshold else Branch.NON_ZERO
