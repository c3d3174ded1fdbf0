"""Named sweeps reproducing the figure data, at full scale or reduced ("desk") scale.

Desk presets cut ``N`` and the trial counts by roughly 4-10x and thin the
parameter grids so that each one finishes in minutes on one core.
"""

from __future__ import annotations

import math

import numpy as np

from ..problem import ParameterError
from .sweep import SweepSpec

DISTS = ["half_gaussian", "gaussian"]


def _grid(lo, hi, step):
    return [round(float(v), 6) for v in np.arange(lo, hi + 0.5 * step, step)]


def fig3a(desk: bool) -> list[SweepSpec]:
    """RMSE against sparseness at ``A_s^2 = 250``: finite-A_s theory, LASSO theory and simulation."""
    a_me = _grid(0.05, 0.95, 0.1) if desk else _grid(0.02, 1.0, 0.02)
    etas = [0.05] if desk else [0.1, 0.05, 0.01]
    alphas = [0.8] if desk else [0.4, 0.8]
    me = [SweepSpec("me", {"as2": 250.0, "method": "l0"},
                    {"dist": DISTS, "alpha": alphas, "eta": etas, "init": ["near_zero", "non_zero"],
                     "a": a_me}),
          SweepSpec("me", {"method": "lasso"}, {"dist": DISTS, "alpha": alphas, "eta": etas, "a": a_me})]
    sim = SweepSpec("hybrid",
                    {"n": 200 if desk else 2000, "as2": 250.0, "r_init": "truth", "backend": "sde",
                     "outer_iters": 5 if desk else 50},
                    {"dist": DISTS, "alpha": alphas, "eta": etas, "a": [0.1, 0.3] if desk else _grid(0.1, 0.9, 0.1)},
                    trials=2 if desk else 10)
    return me + [sim]


def fig4(desk: bool) -> list[SweepSpec]:
    """Phase diagrams: critical sparseness against compression rate, L0 (infinite A_s) and LASSO."""
    alphas = [0.3, 0.5, 0.7] if desk else _grid(0.1, 0.9, 0.05)
    etas = [0.01] if desk else [0.01, 0.05, 0.1]
    base = {"as2": math.inf, "a_min": 0.01, "a_max": 1.0, "a_step": 0.02 if desk else 0.01}
    return [SweepSpec("scan-critical", {**base, "method": m}, {"dist": DISTS, "eta": etas, "alpha": alphas})
            for m in ("l0", "lasso")]


def fig5b(desk: bool) -> list[SweepSpec]:
    """Final RMSE from ``r = 0`` with a decreasing threshold, against the near-zero theory."""
    alphas = [0.8] if desk else [0.4, 0.8]
    a_vals = [0.1, 0.3, 0.5] if desk else _grid(0.1, 0.9, 0.1)
    sim = SweepSpec("hybrid",
                    {"n": 400 if desk else 4000, "as2": 1e7, "r_init": "zeros", "backend": "sde",
                     "eta_end": 0.01, "outer_iters": 50},
                    {"dist": DISTS, "alpha": alphas, "eta_init": [0.01, 0.6] if desk else [0.01, 0.1, 0.3, 0.6],
                     "a": a_vals},
                    trials=2 if desk else 20)
    a_me = _grid(0.05, 0.95, 0.1) if desk else _grid(0.02, 1.0, 0.02)
    theory = [SweepSpec("me", {"method": m, "eta": 0.01, "as2": math.inf},
                        {"dist": DISTS, "alpha": alphas, "a": a_me}) for m in ("l0", "lasso")]
    return [sim] + theory


def fig6(desk: bool) -> list[SweepSpec]:
    """Minimum RMSE under the optimal threshold with observation noise (half-Gaussian sources)."""
    grid = ({"beta": [0.05], "alpha": [0.5, 0.7], "a": [0.2, 0.3]} if desk else
            {"beta": [0.01, 0.05, 0.1], "alpha": _grid(0.1, 0.9, 0.1), "a": _grid(0.1, 0.9, 0.1)})
    base = {"dist": "half_gaussian", "as2": math.inf, "n_grid": 16 if desk else 48}
    return [SweepSpec("me-optimal", {**base, "method": m}, grid) for m in ("l0", "lasso")]


def fig8(desk: bool) -> list[SweepSpec]:
    """Wavelet/Fourier imaging: zero-fill, L1 minimization, LASSO and L0 over threshold grids."""
    base = {"size": 64 if desk else 128, "sampling": 0.4 if desk else 0.3, "instance_seed": 0}
    lasso_etas = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    l0_etas = [0.02, 0.03, 0.05] if desk else [0.004, 0.01, 0.02, 0.03, 0.05]
    return [SweepSpec("imaging", {**base, "method": "zerofill"}),
            SweepSpec("imaging", {**base, "method": "l1eq"}),
            SweepSpec("imaging", {**base, "method": "lasso"}, {"eta": lasso_etas}),
            SweepSpec("imaging", {**base, "method": "l0", "outer_iters": 30}, {"eta": l0_etas})]


def fig9(desk: bool) -> list[SweepSpec]:
    """Final direction cosines of CIM pump schedules and SA cooling schedules with ``r = x``."""
    n = 100 if desk else 500
    trials = 100 if desk else 1000
    base = {"n": n, "alpha": 0.6, "a": 0.6, "dist": "gaussian", "eta": 0.05}
    return [SweepSpec("cim", {**base, "as2": 1e7}, {"pump": ["constant", "linear", "square"]}, trials),
            SweepSpec("sa", {**base, "horizon": 1e4 if desk else 1e5},
                      {"schedule": ["zero", "exp", "inv_linear", "inv_log"]}, trials)]


PRESETS = {"fig3a": fig3a, "fig4": fig4, "fig5b": fig5b, "fig6": fig6, "fig8": fig8, "fig9": fig9}


def preset(name: str, desk: bool = False) -> list[SweepSpec]:
    try:
        return PRESETS[name](desk)
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
