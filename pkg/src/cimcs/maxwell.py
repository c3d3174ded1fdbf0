"""Deterministic support estimation by sequential Maxwell-rule sweeps.

This is the noiseless, adiabatic idealization of the CIM: each spin in turn
takes the branch of lower potential, ``sigma_i = H(F_chi(h_i) - eta)``, and its
value is set to the single-spin optimum ``r_i = sigma_i h_i``. Every update is
an exact coordinate minimization, so the energy never increases.
"""

from __future__ import annotations

import numba
import numpy as np

from .coupling import as_coupling
from .problem import Chi


@numba.njit(cache=True)
def _sweep_dense(gram, diag, h, rs, sigma, perm, eta, signed, log_idx, log_sigma, log_r, log_pos):
    flips = 0
    n_log = log_idx.size
    for i in perm:
        hi = h[i]
        fh = abs(hi) if signed else hi
        new_s = 1 if fh > eta else 0
        new_r = hi / diag[i] if new_s else 0.0
        old_r = rs[i]
        if new_s != sigma[i]:
            flips += 1
        elif new_r == old_r:
            continue
        sigma[i] = new_s
        delta = new_r - old_r
        if delta != 0.0:
            rs[i] = new_r
            for k in range(h.size):
                h[k] -= gram[i, k] * delta
            h[i] += diag[i] * delta
        if log_pos[0] < n_log:
            p = log_pos[0]
            log_idx[p] = i
            log_sigma[p] = new_s
            log_r[p] = new_r
            log_pos[0] = p + 1
    return flips


def _sweep_columns(cpl, h, rs, sigma, perm, eta, signed, log):
    """Same update as ``_sweep_dense`` with coupling columns fetched on demand."""
    flips = 0
    diag = cpl.diag
    for i in perm:
        hi = h[i]
        fh = abs(hi) if signed else hi
        new_s = 1 if fh > eta else 0
        new_r = hi / diag[i] if new_s else 0.0
        if new_s != sigma[i]:
            flips += 1
        elif new_r == rs[i]:
            continue
        sigma[i] = new_s
        delta = new_r - rs[i]
        if delta != 0.0:
            rs[i] = new_r
            h -= cpl.column(i) * delta
            h[i] += diag[i] * delta
        if log is not None and len(log[0]) < log[3]:
            log[0].append(i)
            log[1].append(new_s)
            log[2].append(new_r)
    return flips


def maxwell_support(problem, r, eta: float, chi, rng: np.random.Generator, *,
                    max_sweeps: int = 200, log_updates: int = 0):
    """Sequential Maxwell-rule sweeps from the support of ``r`` until no spin flips.

    Parameters
    ----------
    problem : Instance or Coupling
        A dense coupling matrix is used when available; otherwise columns
        are requested one update at a time (much slower per update).
    r : array
        Starting values; the starting support is ``r != 0``.
    eta : float
        Threshold, ``sqrt(2 lam)``.
    chi : Chi
    rng : numpy Generator
        Draws one visiting order per sweep.
    max_sweeps : int
    log_updates : int
        If positive, record up to this many updates as ``(index, sigma, r)``.

    Returns
    -------
    sigma : int8 array
    r : float array
        Values after the sweeps (zero off the support).
    info : dict
        ``sweeps``, ``converged`` and, when requested, ``log`` as a tuple of
        arrays ``(index, sigma, r)``.
    """
    cpl = as_coupling(problem)
    gram = cpl.dense
    n = cpl.n
    rs = np.array(r, dtype=float)
    if rs.shape != (n,):
        raise ValueError(f"r has shape {rs.shape}, expected ({n},)")
    sigma = (rs != 0).astype(np.int8)
    h = cpl.local_field(rs)
    signed = Chi.parse(chi) is Chi.SIGNED
    log_idx = np.zeros(log_updates, dtype=np.int64)
    log_sigma = np.zeros(log_updates, dtype=np.int8)
    log_r = np.zeros(log_updates)
    log_pos = np.zeros(1, dtype=np.int64)
    diag = np.ascontiguousarray(cpl.diag, dtype=float)
    converged = False
    sweeps = 0
    col_log = ([], [], [], log_updates) if log_updates else None
    for sweeps in range(1, max_sweeps + 1):
        perm = rng.permutation(n)
        if gram is not None:
            flips = _sweep_dense(gram, diag, h, rs, sigma, perm, float(eta), signed,
                                 log_idx, log_sigma, log_r, log_pos)
        else:
            flips = _sweep_columns(cpl, h, rs, sigma, perm, float(eta), signed, col_log)
        if flips == 0:
            converged = True
            break
    info = {"sweeps": sweeps, "converged": converged}
    if col_log is not None and gram is None:
        info["log"] = (np.array(col_log[0], dtype=np.int64), np.array(col_log[1], dtype=np.int8),
                       np.array(col_log[2]))
    elif log_updates:
        k = int(log_pos[0])
        info["log"] = (log_idx[:k].copy(), log_sigma[:k].copy(), log_r[:k].copy())
    return sigma, rs * sigma, info
