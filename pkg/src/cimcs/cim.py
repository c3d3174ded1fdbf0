"""Measurement-feedback coherent Ising machine simulated with truncated-Wigner SDEs.

Each of the N pulses carries an in-phase amplitude ``c`` and a quadrature
amplitude ``s``. The feedback injects ``K (F_chi(h) - eta)`` into the in-phase
component, where ``h`` is the local field of the current support estimate
``sigma = H(c)``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coupling import as_coupling
from .problem import Chi


class IntegrationDiverged(FloatingPointError):
    """Amplitudes left the physical range; reduce ``dt``."""


class PumpKind(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    SQUARE = "square"


@dataclass(frozen=True)
class PumpSchedule:
    """Normalized pump rate ``p(t)``, reaching ``p_final`` at ``ramp_time``."""

    kind: PumpKind = PumpKind.LINEAR
    p_final: float = 1.5
    ramp_time: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PumpKind(self.kind))
        if self.kind is not PumpKind.CONSTANT and not self.ramp_time > 0:
            raise ValueError("ramp_time must be positive for ramp schedules")

    def __call__(self, t: float) -> float:
        if self.kind is PumpKind.CONSTANT:
            return self.p_final
        u = min(max(t / self.ramp_time, 0.0), 1.0)
        if self.kind is PumpKind.LINEAR:
            return self.p_final * u
        return self.p_final * u * u


@dataclass(frozen=True)
class CimConfig:
    """Parameters of one support-estimation run.

    ``as2`` is the saturation parameter A_s^2; ``math.inf`` switches the
    quantum noise off.
    """

    as2: float = 1e7
    k_tilde: float = 0.25
    pump: PumpSchedule = field(default_factory=PumpSchedule)
    duration: float = 5.0
    dt: float = 0.01
    chi: Chi = Chi.SIGNED

    def __post_init__(self):
        object.__setattr__(self, "chi", Chi.parse(self.chi))
        if not self.as2 > 0:
            raise ValueError(f"as2 must be positive, got {self.as2}")
        if not self.k_tilde > 0:
            raise ValueError(f"k_tilde must be positive, got {self.k_tilde}")
        if not 0 < self.dt <= self.duration:
            raise ValueError(f"need 0 < dt <= duration, got dt={self.dt}, duration={self.duration}")
        if self.dt * (1.0 + max(self.pump.p_final, 0.0)) >= 0.5:
            raise ValueError(f"dt={self.dt} too large for pump {self.pump.p_final}")

    @property
    def noise_scale(self) -> float:
        return 0.0 if math.isinf(self.as2) else 1.0 / math.sqrt(self.as2)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @classmethod
    def algorithm_default(cls, as2: float = 1e7, chi=Chi.SIGNED, **kw) -> "CimConfig":
        """Linear pump ramp 0 -> 1.5 over the whole run; T=5 at large A_s^2, T=200 at small."""
        duration = kw.pop("duration", 5.0 if as2 >= 1e5 else 200.0)
        pump = PumpSchedule(PumpKind.LINEAR, 1.5, duration)
        return cls(as2=as2, pump=pump, duration=duration, chi=chi, **kw)


@dataclass
class OpoState:
    c: np.ndarray
    s: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.c.shape != self.s.shape:
            raise ValueError("c and s must have equal shape")

    @classmethod
    def zeros(cls, n: int) -> "OpoState":
        return cls(np.zeros(n), np.zeros(n), 0.0)


def local_field_cim(problem, r, sigma) -> np.ndarray:
    """Local field ``h_i = b_i - sum_{j != i} G_ij r_j sigma_j``."""
    cpl = as_coupling(problem)
    r = np.asarray(r, dtype=float)
    sigma = np.asarray(sigma)
    if r.shape != (cpl.n,) or sigma.shape != (cpl.n,):
        raise ValueError(f"expected length-{cpl.n} vectors, got {r.shape} and {sigma.shape}")
    return cpl.local_field(r * (sigma != 0))


def f_chi(h, chi):
    h = np.asarray(h, dtype=float)
    return np.abs(h) if Chi.parse(chi) is Chi.SIGNED else h


def injection_field(h, eta: float, chi, k_tilde: float = 0.25):
    """Feedback injection ``K (F_chi(h) - eta)``."""
    return k_tilde * (f_chi(h, chi) - eta)


def _step_inplace(c, s, f, p_now, dt, noise, g1, g2):
    amp2 = c * c + s * s
    dc = dt * ((-1.0 + p_now - amp2) * c + f)
    ds = dt * ((-1.0 - p_now - amp2) * s)
    if noise > 0.0:
        diff = math.sqrt(dt) * noise * np.sqrt(amp2 + 0.5)
        dc += diff * g1
        ds += diff * g2
    c += dc
    s += ds


def wsde_step(state: OpoState, f, p_now: float, cfg: CimConfig, rng: np.random.Generator | None) -> OpoState:
    """One Euler-Maruyama step of the truncated-Wigner equations.

    Returns a new state; ``state`` is left untouched. ``rng`` may be None
    when the noise is switched off.
    """
    c = state.c.copy()
    s = state.s.copy()
    noise = cfg.noise_scale
    if noise > 0.0:
        g = rng.standard_normal((2, c.size))
        g1, g2 = g[0], g[1]
    else:
        g1 = g2 = None
    _step_inplace(c, s, np.asarray(f, dtype=float), p_now, cfg.dt, noise, g1, g2)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
        raise IntegrationDiverged(f"non-finite amplitude at t={state.t + cfg.dt:.4g}")
    return OpoState(c, s, state.t + cfg.dt)


class TrajectoryWriter:
    """CSV sink with columns ``t, i, c, s`` written every ``every`` steps."""

    def __init__(self, fh, every: int = 10):
        self.every = max(1, int(every))
        self.writer = csv.writer(fh)
        self.writer.writerow(["t", "i", "c", "s"])

    def __call__(self, step: int, state: OpoState) -> None:
        if step % self.every:
            return
        t = f"{state.t:.6g}"
        self.writer.writerows((t, i, f"{ci:.9g}", f"{si:.9g}")
                              for i, (ci, si) in enumerate(zip(state.c, state.s)))


def run_support_estimation(problem, r, eta: float, cfg: CimConfig,
                           rng: np.random.Generator | None, *, observer=None,
                           state: OpoState | None = None) -> np.ndarray:
    """Integrate the SDEs over the pump schedule and binarize ``sigma = H(c)``.

    The local field is kept consistent with the instantaneous ``H(c)`` at
    every step; only pulses whose sign changed update it.

    Parameters
    ----------
    problem : Instance or Coupling
    r : array
        Signal values supplied by the digital processor.
    eta : float
        Threshold.
    cfg : CimConfig
    rng : numpy Generator, or None if the noise is off.
    observer : callable(step, OpoState), optional
        Called after every step (for trajectory dumps and tests).
    state : OpoState, optional
        Start state; defaults to ``c = s = 0``.

    Returns
    -------
    sigma : int8 array
    """
    cpl = as_coupling(problem)
    n = cpl.n
    r = np.asarray(r, dtype=float)
    if r.shape != (n,):
        raise ValueError(f"r has shape {r.shape}, expected ({n},)")
    st = OpoState.zeros(n) if state is None else OpoState(state.c.copy(), state.s.copy(), state.t)
    c, s = st.c, st.s
    gram = cpl.dense
    sigma = c > 0
    h = cpl.local_field(r * sigma)
    noise = cfg.noise_scale
    if noise > 0.0 and rng is None:
        raise ValueError("an rng is required when the noise is on")
    signed = cfg.chi is Chi.SIGNED
    limit = 10.0 * math.sqrt(max(cfg.pump.p_final, 1.0))
    g1 = g2 = None
    t0 = st.t
    for step in range(cfg.n_steps):
        t = t0 + step * cfg.dt
        f = cfg.k_tilde * ((np.abs(h) if signed else h) - eta)
        if noise > 0.0:
            g = rng.standard_normal((2, n))
            g1, g2 = g[0], g[1]
        _step_inplace(c, s, f, cfg.pump(t), cfg.dt, noise, g1, g2)
        peak = max(np.max(np.abs(c)), np.max(np.abs(s))) if n else 0.0
        if not peak <= limit:
            raise IntegrationDiverged(
                f"amplitude {peak:.3g} exceeds guard {limit:.3g} at t={t + cfg.dt:.4g}")
        new_sigma = c > 0
        flipped = np.flatnonzero(new_sigma != sigma)
        if flipped.size:
            delta = r[flipped] * (new_sigma[flipped].astype(float) - sigma[flipped])
            if gram is not None:
                h -= gram[:, flipped] @ delta
            else:
                dv = np.zeros(n)
                dv[flipped] = delta
                h -= cpl.matvec(dv)
            h[flipped] += cpl.diag[flipped] * delta
            sigma = new_sigma
        if observer is not None:
            st.t = t + cfg.dt
            observer(step + 1, st)
    return sigma.astype(np.int8)


def with_chi(cfg: CimConfig, chi) -> CimConfig:
    return replace(cfg, chi=Chi.parse(chi))
