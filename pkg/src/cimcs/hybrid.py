"""Alternating minimization: CIM support estimation and CDP signal solve."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import cdp
from .cim import CimConfig, run_support_estimation
from .coupling import RankDeficiencyError, as_coupling
from .lasso import run_ista
from .maxwell import maxwell_support
from .metrics import rmse


class RInit(str, enum.Enum):
    ZEROS = "zeros"
    TRUTH = "truth"
    LASSO = "lasso"


class Backend(str, enum.Enum):
    SDE = "sde"
    MAXWELL = "maxwell"


@dataclass(frozen=True)
class HybridConfig:
    eta_init: float = 0.05
    eta_end: float = 0.05
    outer_iters: int = 50
    r_init: RInit = RInit.ZEROS
    cim: CimConfig = field(default_factory=CimConfig)
    backend: Backend = Backend.SDE
    max_sweeps: int = 200

    def __post_init__(self):
        object.__setattr__(self, "r_init", RInit(self.r_init))
        object.__setattr__(self, "backend", Backend(self.backend))
        if not self.eta_init >= self.eta_end >= 0:
            raise ValueError(f"need eta_init >= eta_end >= 0, got {self.eta_init}, {self.eta_end}")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")

    @property
    def chi(self):
        return self.cim.chi


def threshold_at(cfg: HybridConfig, t: int) -> float:
    """Linearly decreasing threshold ``max(eta_init (1 - t/outer_iters), eta_end)``."""
    return max(cfg.eta_init * (1.0 - t / cfg.outer_iters), cfg.eta_end)


def lambda_of_eta(eta: float) -> float:
    return 0.5 * eta * eta


@dataclass
class TraceRow:
    eta: float
    support_size: int
    energy: float
    rmse: float | None


@dataclass
class HybridResult:
    sigma: np.ndarray
    r: np.ndarray
    trace: list
    rank_deficient: int = 0

    @property
    def energy(self) -> float:
        return self.trace[-1].energy


def initial_signal(problem, cfg: HybridConfig, truth=None) -> np.ndarray:
    cpl = as_coupling(problem)
    if cfg.r_init is RInit.ZEROS:
        return np.zeros(cpl.n)
    if cfg.r_init is RInit.TRUTH:
        if truth is None:
            truth = getattr(problem, "signal", None)
        if truth is None:
            raise ValueError("truth-oracle initialization needs the planted signal")
        return np.array(truth, dtype=float)
    return run_ista(cpl, cfg.eta_init, cfg.chi, accelerate=True).x


def run_hybrid(problem, cfg: HybridConfig, rng: np.random.Generator, *, truth=None,
               r0=None) -> HybridResult:
    """Alternate support estimation and signal solve for ``cfg.outer_iters`` rounds.

    Parameters
    ----------
    problem : Instance or Coupling
    cfg : HybridConfig
    rng : numpy Generator
    truth : array, optional
        Planted signal ``xi*x``; taken from ``problem.signal`` when present.
        Used for the truth-oracle start and for the RMSE column of the trace.
    r0 : array, optional
        Explicit starting values, overriding ``cfg.r_init``.

    Returns
    -------
    HybridResult
        Final support and values, the per-round trace, and the number of
        rounds whose support needed the least-squares fallback.
    """
    cpl = as_coupling(problem)
    if truth is None:
        truth = getattr(problem, "signal", None)
    r = initial_signal(problem, cfg, truth) if r0 is None else np.array(r0, dtype=float)
    truth_bits = None if truth is None else (np.asarray(truth) != 0).astype(float)
    trace = []
    rank_deficient = 0
    sigma = (r != 0).astype(np.int8)
    for t in range(cfg.outer_iters):
        eta = threshold_at(cfg, t)
        if cfg.backend is Backend.SDE:
            sigma = run_support_estimation(cpl, r, eta, cfg.cim, rng)
        else:
            sigma, _, _ = maxwell_support(cpl, r * (sigma != 0), eta, cfg.chi, rng,
                                          max_sweeps=cfg.max_sweeps)
        try:
            r = cdp.solve_signal(cpl, sigma)
        except RankDeficiencyError:
            rank_deficient += 1
            r = cdp.solve_signal(cpl, sigma, fallback=True)
        energy = cdp.residual_energy(cpl, r, sigma, lambda_of_eta(eta))
        err = None if truth is None else rmse(r, sigma, truth, truth_bits)
        trace.append(TraceRow(eta, int(np.count_nonzero(sigma)), energy, err))
    return HybridResult(sigma=sigma, r=r, trace=trace, rank_deficient=rank_deficient)
