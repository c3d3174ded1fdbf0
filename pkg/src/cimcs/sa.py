"""Simulated-annealing support estimation with the signal values held fixed."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .coupling import as_coupling
from .metrics import direction_cosine


class CoolingKind(str, enum.Enum):
    ZERO = "zero"
    EXP = "exp"
    INV_LINEAR = "inv_linear"
    INV_LOG = "inv_log"


@dataclass(frozen=True)
class CoolingSchedule:
    """Temperature ``T(t)`` with ``t`` in sweeps; ``tau`` is fixed by ``T(horizon) = final_temp``.

    * exp: ``T0 exp(-t/tau)``
    * inv_linear: ``T0 / (1 + t/tau)``
    * inv_log: ``T0 / log(e + t/tau)``
    """

    kind: CoolingKind = CoolingKind.ZERO
    t0_temp: float = 0.02
    final_temp: float = 2e-5
    horizon: float = 1e5

    def __post_init__(self):
        object.__setattr__(self, "kind", CoolingKind(self.kind))
        if self.kind is not CoolingKind.ZERO and not 0 < self.final_temp < self.t0_temp:
            raise ValueError("need 0 < final_temp < t0_temp")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def log_tau(self) -> float:
        """Natural log of ``tau`` (the inverse-log ``tau`` underflows in linear scale)."""
        ratio = self.t0_temp / self.final_temp
        log_h = math.log(self.horizon)
        if self.kind is CoolingKind.EXP:
            return log_h - math.log(math.log(ratio))
        if self.kind is CoolingKind.INV_LINEAR:
            return log_h - math.log(ratio - 1.0)
        if self.kind is CoolingKind.INV_LOG:
            # exp(ratio) - e, evaluated in log space
            return log_h - (ratio + math.log1p(-math.exp(1.0 - ratio)))
        return math.inf

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is CoolingKind.ZERO:
            return np.zeros_like(t)
        lt = self.log_tau
        if self.kind is CoolingKind.EXP:
            return self.t0_temp * np.exp(-t * math.exp(-lt))
        if self.kind is CoolingKind.INV_LINEAR:
            return self.t0_temp / (1.0 + t * math.exp(-lt))
        with np.errstate(divide="ignore"):
            log_u = np.log(t) - lt
        return self.t0_temp / np.logaddexp(1.0, log_u)


def _delta_energy(sig_i, r_i, h_i, d_i, lam):
    """Energy change of flipping spin ``i`` with ``r`` fixed."""
    return -0.5 * (1 - 2 * sig_i) * (-r_i * r_i * d_i + 2.0 * r_i * h_i - 2.0 * lam)


def acceptance_ratio(problem, r, sigma, i: int, lam: float, temp: float) -> float:
    """Metropolis ratio ``exp(-dH / T)`` for flipping spin ``i``.

    Overflow maps to ``inf`` (always accept); ``temp == 0`` gives the limits
    0, 1 or inf according to the sign of the energy change.
    """
    cpl = as_coupling(problem)
    sigma = np.asarray(sigma)
    r = np.asarray(r, dtype=float)
    h_i = float(cpl.local_field(r * (sigma != 0))[i])
    de = _delta_energy(int(sigma[i] != 0), r[i], h_i, cpl.diag[i], lam)
    if temp <= 0:
        return 0.0 if de > 0 else (1.0 if de == 0 else math.inf)
    x = -de / temp
    return math.inf if x > 709.0 else math.exp(x)


@numba.njit(cache=True)
def _sa_kernel(gram, diag, h, r, sigma, lam, temps, n_sweeps, xi, trace, trace_every, seed):
    np.random.seed(seed)
    n = r.size
    zero_temp = temps.size == 0
    n_trace = 0
    for sweep in range(n_sweeps):
        improved = False
        temp = 0.0 if zero_temp else temps[sweep]
        for _ in range(n):
            i = np.random.randint(n)
            s = sigma[i]
            de = -0.5 * (1 - 2 * s) * (-r[i] * r[i] * diag[i] + 2.0 * r[i] * h[i] - 2.0 * lam)
            if zero_temp:
                accept = de < 0.0
            elif de <= 0.0:
                accept = True
            else:
                accept = np.random.random() < math.exp(-de / temp)
            if accept:
                if de < 0.0:
                    improved = True
                delta = r[i] * (1 - 2 * s)
                sigma[i] = 1 - s
                if delta != 0.0:
                    for k in range(n):
                        h[k] -= gram[i, k] * delta
                    h[i] += diag[i] * delta
        if trace_every > 0 and (sweep + 1) % trace_every == 0 and n_trace < trace.size:
            num = 0
            ns = 0
            nx = 0
            for k in range(n):
                num += sigma[k] * xi[k]
                ns += sigma[k]
                nx += xi[k]
            if ns == 0 and nx == 0:
                trace[n_trace] = 1.0
            elif ns == 0 or nx == 0:
                trace[n_trace] = 0.0
            else:
                trace[n_trace] = num / math.sqrt(ns * nx)
            n_trace += 1
        if zero_temp and not improved:
            # no single flip lowers the energy: every later proposal is rejected
            if _is_local_min(h, r, sigma, diag, lam):
                return sweep + 1, n_trace
    return n_sweeps, n_trace


@numba.njit(cache=True)
def _is_local_min(h, r, sigma, diag, lam):
    for i in range(r.size):
        s = sigma[i]
        de = -0.5 * (1 - 2 * s) * (-r[i] * r[i] * diag[i] + 2.0 * r[i] * h[i] - 2.0 * lam)
        if de < 0.0:
            return False
    return True


@dataclass
class SaResult:
    sigma: np.ndarray
    sweeps: int
    trace: np.ndarray


def run_sa(problem, r, lam: float, sched: CoolingSchedule, rng: np.random.Generator, *,
           sigma0=None, xi=None, trace_every: int = 0) -> SaResult:
    """Metropolis single-spin-flip search over the support with ``r`` fixed.

    Runs ``horizon`` sweeps of ``N`` random single-spin proposals starting
    from ``sigma = 0``. The temperature is held constant within a sweep at
    ``T(sweep index)``. At zero temperature only strictly improving flips are
    accepted, and the run stops as soon as no such flip exists, which yields
    the same final state as running the full horizon.

    Parameters
    ----------
    problem : Instance or Coupling
    r : array
        Fixed signal values.
    lam : float
        L0 weight.
    sched : CoolingSchedule
    rng : numpy Generator
        Seeds the compiled Monte Carlo kernel.
    sigma0 : array, optional
        Starting support instead of all zeros.
    xi : array, optional
        True support for the direction-cosine trace (``problem.xi_true`` if
        present).
    trace_every : int
        Record the direction cosine every this many sweeps (0: none).
    """
    cpl = as_coupling(problem)
    gram = cpl.dense
    if gram is None:
        raise ValueError("simulated annealing needs a dense coupling matrix")
    n = cpl.n
    r = np.ascontiguousarray(r, dtype=float)
    sigma = np.zeros(n, dtype=np.int64) if sigma0 is None else (np.asarray(sigma0) != 0).astype(np.int64)
    h = cpl.local_field(r * sigma)
    n_sweeps = int(round(sched.horizon))
    temps = np.zeros(0) if sched.kind is CoolingKind.ZERO else sched(np.arange(n_sweeps, dtype=float))
    if xi is None:
        xi = getattr(problem, "xi_true", None)
    xi_arr = np.zeros(n, dtype=np.int64) if xi is None else (np.asarray(xi) != 0).astype(np.int64)
    n_trace = n_sweeps // trace_every if trace_every > 0 else 0
    trace = np.zeros(n_trace)
    seed = int(rng.integers(0, 2 ** 31 - 1))
    done, filled = _sa_kernel(gram, np.ascontiguousarray(cpl.diag, dtype=float), h, r, sigma, float(lam),
                              temps, n_sweeps, xi_arr, trace, trace_every, seed)
    if trace_every > 0 and filled < n_trace:
        # frozen zero-temperature chain: the remaining trace is constant
        trace[filled:] = direction_cosine(xi_arr, sigma)
    return SaResult(sigma=sigma.astype(np.int8), sweeps=int(done), trace=trace)
