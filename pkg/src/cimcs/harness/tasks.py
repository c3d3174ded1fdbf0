"""One runner per task kind: a parameter dict and a seed in, records out."""

from __future__ import annotations

import functools
import math
import time

import numpy as np

from .. import cdp, imaging
from ..cim import CimConfig, IntegrationDiverged, PumpKind, PumpSchedule, run_support_estimation
from ..hybrid import Backend, HybridConfig, RInit, lambda_of_eta, run_hybrid
from ..lasso import lasso_objective, run_ista
from ..meanfield import (Branch, Direction, MeConfig, critical_point_scan, grid_search_optimal_eta,
                         solve_me_finite_as, solve_me_infinite_as, solve_me_lasso)
from ..metrics import direction_cosine, rmse
from ..problem import Chi, InstanceParams, Kind, ParameterError, SourceDistribution, synthesize
from ..sa import CoolingKind, CoolingSchedule, run_sa
from .records import Method, RunRecord

_INSTANCE_KEYS = {"n", "alpha", "a", "beta", "dist", "chi", "sigma2", "k", "theta", "instance_seed"}
_ME_KEYS = {"alpha", "a", "eta", "beta", "dist", "chi", "sigma2", "k", "theta", "as2", "method", "init"}

#: accepted parameter keys per task kind
TASK_KEYS = {
    "hybrid": _INSTANCE_KEYS | {"eta", "eta_init", "eta_end", "outer_iters", "r_init", "backend", "as2",
                                "pump", "duration", "k_tilde", "max_sweeps"},
    "cim": _INSTANCE_KEYS | {"eta", "as2", "pump", "duration", "k_tilde"},
    "sa": _INSTANCE_KEYS | {"eta", "schedule", "t0_temp", "final_temp", "horizon"},
    "lasso": _INSTANCE_KEYS | {"eta", "max_iters"},
    "me": _ME_KEYS,
    "me-optimal": _ME_KEYS - {"eta"} | {"eta_min", "eta_max", "n_grid"},
    "scan-critical": _ME_KEYS - {"a"} | {"a_min", "a_max", "a_step", "direction"},
    "imaging": {"size", "sampling", "sparsity", "gamma", "method", "eta", "eta_init", "outer_iters",
                "instance_seed"},
}

#: defaults applied before the sweep's own values
TASK_DEFAULTS = {
    "hybrid": {"n": 500, "alpha": 0.6, "a": 0.2, "beta": 0.0, "dist": "gaussian", "eta_init": 0.05,
               "eta_end": 0.05, "outer_iters": 50, "r_init": "zeros", "backend": "sde", "as2": 1e7,
               "pump": "linear", "max_sweeps": 200},
    "cim": {"n": 500, "alpha": 0.6, "a": 0.6, "beta": 0.0, "dist": "gaussian", "eta": 0.05,
            "as2": 1e7, "pump": "square", "duration": 5.0},
    "sa": {"n": 500, "alpha": 0.6, "a": 0.6, "beta": 0.0, "dist": "gaussian", "eta": 0.05,
           "schedule": "zero", "t0_temp": 0.02, "final_temp": 2e-5, "horizon": 1e5},
    "lasso": {"n": 500, "alpha": 0.6, "a": 0.2, "beta": 0.0, "dist": "gaussian", "eta": 0.05,
              "max_iters": 20000},
    "me": {"alpha": 0.6, "a": 0.2, "eta": 0.05, "beta": 0.0, "dist": "gaussian", "as2": math.inf,
           "method": "l0", "init": "near_zero"},
    "me-optimal": {"alpha": 0.6, "a": 0.2, "beta": 0.05, "dist": "half_gaussian", "as2": math.inf,
                   "method": "l0", "eta_min": 0.002, "eta_max": 0.5, "n_grid": 48},
    "scan-critical": {"alpha": 0.5, "eta": 0.01, "beta": 0.0, "dist": "half_gaussian", "as2": math.inf,
                      "method": "l0", "init": "near_zero", "a_min": 0.01, "a_max": 1.0, "a_step": 0.01,
                      "direction": "up"},
    "imaging": {"size": 64, "sampling": 0.4, "sparsity": 0.134, "gamma": 1e-4, "method": "zerofill",
                "eta": 0.03, "outer_iters": 30},
}


def check_params(task: str, params: dict) -> None:
    """Reject unknown keys and support types inconsistent with the distribution.

    Raises
    ------
    ParameterError
        Naming the offending key.
    """
    if task not in TASK_KEYS:
        raise ParameterError(f"unknown task {task!r}")
    for key in params:
        if key not in TASK_KEYS[task]:
            raise ParameterError(f"key {key!r} is not accepted by task {task!r}")
    if "dist" in TASK_KEYS[task]:
        try:
            kind = Kind(params.get("dist", TASK_DEFAULTS[task].get("dist")))
        except ValueError:
            raise ParameterError(f"key 'dist': unknown distribution {params.get('dist')!r}") from None
        if params.get("chi") is not None:
            chi = Chi.parse(params["chi"])
            if chi is not SourceDistribution(kind).chi:
                raise ParameterError(f"key 'chi': {chi.value!r} does not match dist {kind.value!r}")
    if task == "imaging" and params.get("method", "zerofill") not in IMAGING_METHODS:
        raise ParameterError(f"key 'method': unknown imaging method {params.get('method')!r}")
    if task in ("me", "me-optimal", "scan-critical") and params.get("method", "l0") not in ("l0", "lasso"):
        raise ParameterError(f"key 'method': expected 'l0' or 'lasso', got {params.get('method')!r}")


def _dist(p) -> SourceDistribution:
    kw = {k: float(p[k]) for k in ("sigma2", "k", "theta") if k in p}
    return SourceDistribution(Kind(p["dist"]), **kw)


def _instance(p, seed):
    iseed = int(p.get("instance_seed", seed))
    params = InstanceParams(n=int(p["n"]), alpha=float(p["alpha"]), a=float(p["a"]),
                            beta=float(p["beta"]), dist=_dist(p), seed=iseed)
    return synthesize(params), iseed


def _instance_columns(p, iseed, chi):
    return {"instance_seed": iseed, "n": int(p["n"]), "alpha": float(p["alpha"]), "a": float(p["a"]),
            "beta": float(p["beta"]), "dist": Kind(p["dist"]).value, "chi": Chi.parse(chi).value}


def _cim_config(p, chi) -> CimConfig:
    as2 = float(p["as2"])
    duration = float(p.get("duration", 5.0 if as2 >= 1e5 else 200.0))
    kind = PumpKind(p.get("pump", "linear"))
    pump = PumpSchedule(kind, 1.5, duration)
    return CimConfig(as2=as2, pump=pump, duration=duration, k_tilde=float(p.get("k_tilde", 0.25)), chi=chi)


def run_hybrid_task(p, seed, rng):
    inst, iseed = _instance(p, seed)
    backend = Backend(p["backend"])
    if "eta" in p:
        p = {**p, "eta_init": p["eta"], "eta_end": p["eta"]}
    cfg = HybridConfig(float(p["eta_init"]), float(p["eta_end"]), int(p["outer_iters"]), RInit(p["r_init"]),
                       _cim_config(p, inst.chi), backend, int(p["max_sweeps"]))
    method = Method.HYBRID_CIM if backend is Backend.SDE else Method.HYBRID_MAXWELL
    cols = _instance_columns(p, iseed, inst.chi)
    cols.update(eta_init=cfg.eta_init, eta_end=cfg.eta_end, as2=cfg.cim.as2, r_init=cfg.r_init.value,
                schedule=cfg.cim.pump.kind.value if backend is Backend.SDE else None)
    try:
        res = run_hybrid(inst, cfg, rng)
    except IntegrationDiverged:
        return [(method, cols, {"converged": False})]
    metrics = {"rmse": rmse(res.r, res.sigma, inst.x_true, inst.xi_true),
               "direction_cosine": direction_cosine(inst.xi_true, res.sigma),
               "energy": res.energy, "iterations": cfg.outer_iters, "converged": True}
    return [(method, cols, metrics)]


def run_cim_task(p, seed, rng):
    """Single support estimation with the oracle values ``r = x``."""
    inst, iseed = _instance(p, seed)
    cfg = _cim_config(p, inst.chi)
    eta = float(p["eta"])
    cols = _instance_columns(p, iseed, inst.chi)
    cols.update(eta=eta, as2=cfg.as2, r_init="oracle_x", schedule=cfg.pump.kind.value)
    try:
        sigma = run_support_estimation(inst, inst.x_true, eta, cfg, rng)
    except IntegrationDiverged:
        return [(Method.HYBRID_CIM, cols, {"converged": False})]
    metrics = {"rmse": rmse(inst.x_true, sigma, inst.x_true, inst.xi_true),
               "direction_cosine": direction_cosine(inst.xi_true, sigma),
               "energy": cdp.residual_energy(inst, inst.x_true, sigma, lambda_of_eta(eta)),
               "iterations": cfg.n_steps, "converged": True}
    return [(Method.HYBRID_CIM, cols, metrics)]


def run_sa_task(p, seed, rng):
    inst, iseed = _instance(p, seed)
    eta = float(p["eta"])
    sched = CoolingSchedule(CoolingKind(p["schedule"]), float(p["t0_temp"]), float(p["final_temp"]),
                            float(p["horizon"]))
    res = run_sa(inst, inst.x_true, lambda_of_eta(eta), sched, rng)
    cols = _instance_columns(p, iseed, inst.chi)
    cols.update(eta=eta, r_init="oracle_x", schedule=sched.kind.value)
    metrics = {"rmse": rmse(inst.x_true, res.sigma, inst.x_true, inst.xi_true),
               "direction_cosine": direction_cosine(inst.xi_true, res.sigma),
               "energy": cdp.residual_energy(inst, inst.x_true, res.sigma, lambda_of_eta(eta)),
               "iterations": res.sweeps, "converged": True}
    return [(Method.SA, cols, metrics)]


def run_lasso_task(p, seed, rng):
    inst, iseed = _instance(p, seed)
    eta = float(p["eta"])
    res = run_ista(inst, eta, inst.chi, max_iters=int(p["max_iters"]), accelerate=True)
    sigma = (res.x != 0).astype(np.int8)
    cols = _instance_columns(p, iseed, inst.chi)
    cols["eta"] = eta
    metrics = {"rmse": rmse(res.x, np.ones_like(sigma), inst.x_true, inst.xi_true),
               "direction_cosine": direction_cosine(inst.xi_true, sigma),
               "energy": lasso_objective(inst.coupling, res.x, eta),
               "iterations": res.iterations, "converged": bool(res.converged)}
    return [(Method.LASSO, cols, metrics)]


def _me_config(p, **over) -> MeConfig:
    kw = dict(alpha=float(p["alpha"]), a=float(p.get("a", 0.5)), eta=float(p.get("eta", 0.05)),
              dist=_dist(p), beta=float(p["beta"]), as2=float(p["as2"]), init=Branch(p.get("init", "near_zero")))
    kw.update(over)
    return MeConfig(**kw)


def _me_solver(p):
    if p["method"] == "lasso":
        return solve_me_lasso, Method.ME_LASSO
    if math.isinf(float(p["as2"])):
        return solve_me_infinite_as, Method.ME_CIM_INF
    return solve_me_finite_as, Method.ME_CIM_FINITE


def _me_columns(cfg: MeConfig):
    return {"alpha": cfg.alpha, "a": cfg.a, "beta": cfg.beta, "dist": cfg.dist.kind.value,
            "chi": cfg.chi.value, "eta": cfg.eta, "as2": cfg.as2}


def _state_metrics(st):
    m = {"converged": bool(st.converged), "iterations": int(st.iterations)}
    if st.converged:
        m.update(rmse=st.rmse, r_overlap=st.r_overlap, q_mag=st.q_mag, u_susc=st.u_susc,
                 branch=st.branch.value)
    return m


def run_me_task(p, seed, rng):
    solver, method = _me_solver(p)
    cfg = _me_config(p)
    cols = _me_columns(cfg)
    cols["r_init"] = Branch(p["init"]).value
    return [(method, cols, _state_metrics(solver(cfg)))]


def run_me_optimal_task(p, seed, rng):
    solver, method = _me_solver(p)
    cfg = _me_config(p)
    cols = _me_columns(cfg)
    try:
        opt = grid_search_optimal_eta(solver, cfg, (float(p["eta_min"]), float(p["eta_max"])),
                                      n_grid=int(p["n_grid"]))
    except RuntimeError:
        cols["eta"] = None
        return [(method, cols, {"converged": False})]
    cols["eta"] = opt.eta
    return [(method, cols, _state_metrics(opt.state))]


def run_scan_task(p, seed, rng):
    """Critical sparseness of a scan over ``a``; the ``a`` column holds ``a_c`` (empty if no jump)."""
    solver, method = _me_solver(p)
    cfg = _me_config(p, a=float(p["a_min"]))
    grid = np.arange(float(p["a_min"]), float(p["a_max"]) + 0.5 * float(p["a_step"]), float(p["a_step"]))
    grid = grid[(grid > 0) & (grid <= 1)]
    crit = critical_point_scan(solver, cfg, grid, Direction(p["direction"]))
    cols = _me_columns(cfg)
    cols["r_init"] = Branch(p["init"]).value
    if crit is None:
        cols["a"] = None
        return [(method, cols, {"converged": True})]
    cols["a"] = crit.a_c
    return [(method, cols, {"rmse": crit.rmse_at_c, "converged": True})]


IMAGING_METHODS = ("zerofill", "l1eq", "lasso", "l0")


@functools.lru_cache(maxsize=4)
def _imaging_problem(size, sampling, sparsity, gamma, iseed):
    return imaging.make_problem((size, size), sampling, sparsity, gamma, iseed)


@functools.lru_cache(maxsize=2)
def _imaging_coupling(size, sampling, sparsity, gamma, iseed, normalized):
    prob = _imaging_problem(size, sampling, sparsity, gamma, iseed)
    if normalized:
        return imaging.ImagingCoupling(prob)
    return imaging.ImagingCoupling(prob, normalized=False, dense=False)


def _haar_support(img):
    return (np.abs(imaging.haar2d(img)).ravel() > 1e-9).astype(np.int8)


def run_imaging_task(p, seed, rng):
    iseed = int(p.get("instance_seed", seed))
    key = (int(p["size"]), float(p["sampling"]), float(p["sparsity"]), float(p["gamma"]), iseed)
    prob = _imaging_problem(*key)
    method = p["method"]
    truth_support = _haar_support(prob.image)
    cols = {"instance_seed": iseed, "n": prob.n, "alpha": prob.sampling, "a": float(p["sparsity"]),
            "beta": 0.0, "chi": Chi.SIGNED.value}
    metrics = {}
    if method == "zerofill":
        rec, out = imaging.reconstruct_zero_fill(prob), Method.ZERO_FILL
    elif method == "l1eq":
        rec, out = imaging.reconstruct_l1eq(prob), Method.L1EQ
        metrics = {"iterations": rec.info["iterations"], "converged": bool(rec.info["converged"])}
    elif method == "lasso":
        eta = float(p["eta"])
        cols["eta"] = eta
        rec = imaging.reconstruct_lasso(prob, eta, coupling=_imaging_coupling(*key, False))
        out = Method.LASSO
        metrics = {"iterations": rec.info["iterations"], "converged": bool(rec.info["converged"]),
                   "direction_cosine": direction_cosine(truth_support, _haar_support(rec.image))}
    else:
        eta = float(p["eta"])
        eta_init = float(p.get("eta_init", eta))
        cfg = HybridConfig(eta_init, eta, int(p["outer_iters"]), RInit.LASSO, backend=Backend.MAXWELL,
                           cim=CimConfig(chi=Chi.SIGNED))
        cols.update(eta=eta, eta_init=eta_init, eta_end=eta, r_init=RInit.LASSO.value)
        rec = imaging.reconstruct_l0(prob, cfg, rng, coupling=_imaging_coupling(*key, True))
        out = Method.HYBRID_MAXWELL
        res = rec.info["result"]
        metrics = {"iterations": cfg.outer_iters, "energy": rec.info["energy"],
                   "direction_cosine": direction_cosine(truth_support, res.sigma)}
    metrics["rmse"] = rec.rmse
    return [(out, cols, metrics)]


RUNNERS = {
    "hybrid": run_hybrid_task,
    "cim": run_cim_task,
    "sa": run_sa_task,
    "lasso": run_lasso_task,
    "me": run_me_task,
    "me-optimal": run_me_optimal_task,
    "scan-critical": run_scan_task,
    "imaging": run_imaging_task,
}


def execute(task: str, params: dict, seed: int, trial: int) -> list[RunRecord]:
    """Run one task and wrap its outputs as records (wall time per task, split evenly)."""
    p = dict(TASK_DEFAULTS[task])
    p.update(params)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    outputs = RUNNERS[task](p, seed, rng)
    wall = 1e3 * (time.perf_counter() - t0) / max(len(outputs), 1)
    records = []
    for method, cols, metrics in outputs:
        cols = {k: _plain(v) for k, v in cols.items()}
        cols.update(task=task, trial=trial)
        metrics = {k: _plain(v) for k, v in metrics.items()}
        records.append(RunRecord(method, seed, cols, metrics, wall))
    return records


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v
