"""Command line entry point ``cimcs``.

Every subcommand takes ``--preset``, ``--desk``, ``--seed``, ``--out`` and
``--config``. A config file is a JSON object whose keys are the long flag
names with dashes replaced by underscores; flags given on the command line
override it. Parameter flags accept several values, which become a grid.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .. import imaging
from ..meanfield import l0_threshold, l1_weak_threshold
from ..metrics import ks_one_sided
from ..problem import Chi, InstanceParams, Kind, ParameterError, SourceDistribution, save_instance, synthesize
from .presets import PRESETS, preset
from .records import Method, RecordWriter, RunRecord
from .sweep import SweepSpec, run_sweep

#: task kinds a subcommand runs when given a preset
SUBCOMMAND_TASKS = {
    "hybrid": {"hybrid", "cim"},
    "lasso": {"lasso"},
    "sa": {"sa"},
    "solve-me": {"me", "me-optimal"},
    "scan-critical": {"scan-critical"},
    "imaging": {"imaging"},
    "sweep": None,
}

PHASE_COLUMNS = ("method", "dist", "alpha", "eta", "a_c", "branch", "rmse_at_c")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--preset", choices=sorted(PRESETS), help="run a named figure sweep")
    g.add_argument("--desk", action="store_true", help="reduced-scale preset")
    g.add_argument("--seed", type=int, default=0, help="base seed (unsigned 64-bit)")
    g.add_argument("--out", default="-", help="output CSV path, '-' for standard output")
    g.add_argument("--config", help="JSON file with flag values")
    g.add_argument("--trials", type=int, default=1)
    g.add_argument("--workers", type=int, default=1, help="worker processes")


def _instance_flags(p) -> None:
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--beta", type=float, nargs="+")
    p.add_argument("--dist", choices=[k.value for k in Kind], nargs="+")
    p.add_argument("--chi", choices=[c.value for c in Chi])
    p.add_argument("--instance-seed", type=int, help="fix the instance across grid points and trials")


def _me_flags(p) -> None:
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--beta", type=float, nargs="+")
    p.add_argument("--dist", choices=[k.value for k in Kind], nargs="+")
    p.add_argument("--chi", choices=[c.value for c in Chi])
    p.add_argument("--as2", type=float, nargs="+", help="A_s^2; 'inf' for the noiseless limit")
    p.add_argument("--method", choices=["l0", "lasso"], nargs="+")
    p.add_argument("--init", choices=["near_zero", "non_zero"], nargs="+")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="cimcs", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    sp = {}

    p = sp["synth"] = subs.add_parser("synth", help="write a random instance to a directory")
    _common(p)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--a", type=float, default=0.2)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--dist", choices=[k.value for k in Kind], default="gaussian")
    p.add_argument("--dir", required=False, help="instance directory (required)")

    p = sp["hybrid"] = subs.add_parser("hybrid", help="alternating CIM / least-squares minimization")
    _common(p)
    _instance_flags(p)
    p.add_argument("--eta", type=float, nargs="+", help="constant threshold")
    p.add_argument("--eta-init", type=float, nargs="+")
    p.add_argument("--eta-end", type=float, nargs="+")
    p.add_argument("--outer-iters", type=int, nargs="+")
    p.add_argument("--r-init", choices=["zeros", "truth", "lasso"], nargs="+")
    p.add_argument("--backend", choices=["sde", "maxwell"], nargs="+")
    p.add_argument("--as2", type=float, nargs="+")
    p.add_argument("--pump", choices=["constant", "linear", "square"], nargs="+")
    p.add_argument("--duration", type=float, nargs="+")

    p = sp["lasso"] = subs.add_parser("lasso", help="soft-thresholding LASSO baseline")
    _common(p)
    _instance_flags(p)
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--max-iters", type=int)

    p = sp["sa"] = subs.add_parser("sa", help="simulated-annealing support search with r = x")
    _common(p)
    _instance_flags(p)
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--schedule", choices=["zero", "exp", "inv_linear", "inv_log"], nargs="+")
    p.add_argument("--horizon", type=float, nargs="+", help="sweeps")
    p.add_argument("--t0-temp", type=float)
    p.add_argument("--final-temp", type=float)

    p = sp["solve-me"] = subs.add_parser("solve-me", help="macroscopic equations on a parameter grid")
    _common(p)
    _me_flags(p)
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--optimal", action="store_true", help="minimize the RMSE over eta instead")
    p.add_argument("--eta-min", type=float)
    p.add_argument("--eta-max", type=float)
    p.add_argument("--n-grid", type=int)

    p = sp["scan-critical"] = subs.add_parser("scan-critical", help="critical sparseness (phase-diagram CSV)")
    _common(p)
    _me_flags(p)
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--a-min", type=float)
    p.add_argument("--a-max", type=float)
    p.add_argument("--a-step", type=float)
    p.add_argument("--direction", choices=["up", "down"])

    p = sp["thresholds"] = subs.add_parser("thresholds", help="L0 and L1 recovery thresholds")
    _common(p)
    p.add_argument("--alpha", type=float, nargs="+", default=[round(0.05 * k, 2) for k in range(1, 20)])

    p = sp["imaging"] = subs.add_parser("imaging", help="wavelet/Fourier imaging experiment")
    _common(p)
    p.add_argument("action", nargs="?", choices=["synth-phantom", "reconstruct"],
                   help="omit to run a preset or a grid as records")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--sampling", type=float, default=0.4)
    p.add_argument("--sparsity", type=float, default=0.134)
    p.add_argument("--gamma", type=float, default=1e-4)
    p.add_argument("--method", choices=list(imaging_methods()), nargs="+", default=["zerofill"])
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--eta-init", type=float)
    p.add_argument("--outer-iters", type=int)
    p.add_argument("--dir", help="directory for phantom.pgm and mask.pgm")
    p.add_argument("--image-out", help="reconstructed image (PGM plus float64 sidecar)")

    p = sp["sweep"] = subs.add_parser("sweep", help="run a preset or a JSON sweep description")
    _common(p)
    return parser, sp


def imaging_methods():
    from .tasks import IMAGING_METHODS

    return IMAGING_METHODS


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def _spec_from_flags(task: str, args, keys) -> SweepSpec:
    base, grid = {}, {}
    for key in keys:
        val = getattr(args, key, None)
        if val is None:
            continue
        if isinstance(val, list):
            if len(val) == 1:
                base[key] = val[0]
            else:
                grid[key] = val
        else:
            base[key] = val
    return SweepSpec(task, base, grid, args.trials)


def _preset_specs(args, command):
    specs = preset(args.preset, args.desk)
    wanted = SUBCOMMAND_TASKS[command]
    if wanted is not None:
        specs = [s for s in specs if s.task in wanted]
        if not specs:
            raise ParameterError(f"preset {args.preset!r} has no {command!r} runs")
    return specs


_INSTANCE = ["n", "alpha", "a", "beta", "dist", "chi", "instance_seed"]
_ME = ["alpha", "beta", "dist", "chi", "as2", "method", "init"]
FLAG_KEYS = {
    "hybrid": _INSTANCE + ["eta", "eta_init", "eta_end", "outer_iters", "r_init", "backend", "as2", "pump",
                           "duration"],
    "lasso": _INSTANCE + ["eta", "max_iters"],
    "sa": _INSTANCE + ["eta", "schedule", "horizon", "t0_temp", "final_temp"],
    "me": _ME + ["a", "eta"],
    "me-optimal": _ME + ["a", "eta_min", "eta_max", "n_grid"],
    "scan-critical": _ME + ["eta", "a_min", "a_max", "a_step", "direction"],
    "imaging": ["size", "sampling", "sparsity", "gamma", "method", "eta", "eta_init", "outer_iters"],
}


def _write_records(specs, args) -> int:
    with _output(args.out) as fh:
        writer = RecordWriter(fh)
        records = list(run_sweep(specs, args.seed, writer=writer, workers=args.workers))
    _report_ks(records)
    return 0


def _report_ks(records) -> None:
    """One-sided KS of CIM (square pump) against each SA schedule, when both are present."""
    cim = [r.metrics["direction_cosine"] for r in records
           if r.params.get("task") == "cim" and r.params.get("schedule") == "square" and r.converged]
    if not cim:
        return
    by_sched = {}
    for r in records:
        if r.method is Method.SA:
            by_sched.setdefault(r.params["schedule"], []).append(r.metrics["direction_cosine"])
    for sched, vals in by_sched.items():
        d, p = ks_one_sided(cim, vals)
        print(f"KS one-sided, H1: CIM(square) direction cosines stochastically larger than "
              f"SA({sched}): D={d:.4f} p={p:.3g} (n={len(cim)}, m={len(vals)})", file=sys.stderr)


def cmd_synth(args) -> int:
    if not args.dir:
        raise ParameterError("synth needs --dir")
    params = InstanceParams(args.n, args.alpha, args.a, args.beta, SourceDistribution(Kind(args.dist)),
                            seed=args.seed)
    path = save_instance(synthesize(params), args.dir)
    print(path, file=sys.stderr)
    return 0


def cmd_thresholds(args) -> int:
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "l0", "l1_nonneg", "l1_signed"])
        for a in args.alpha:
            w.writerow([repr(float(a)), repr(l0_threshold(a)), repr(l1_weak_threshold(a, Chi.NONNEG)),
                        repr(l1_weak_threshold(a, Chi.SIGNED))])
    return 0


def cmd_scan(args) -> int:
    specs = (_preset_specs(args, "scan-critical") if args.preset
             else [_spec_from_flags("scan-critical", args, FLAG_KEYS["scan-critical"])])
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PHASE_COLUMNS)
        fh.flush()
        for rec in run_sweep(specs, args.seed, workers=args.workers):
            a_c = rec.params.get("a")
            rm = rec.metrics.get("rmse")
            w.writerow([rec.method.value, rec.params["dist"], repr(rec.params["alpha"]), repr(rec.params["eta"]),
                        "" if a_c is None else repr(a_c), rec.params.get("r_init", ""),
                        "" if rm is None else repr(rm)])
            fh.flush()
    return 0


def cmd_imaging(args) -> int:
    if args.action == "synth-phantom":
        if not args.dir:
            raise ParameterError("synth-phantom needs --dir")
        prob = imaging.make_problem((args.size, args.size), args.sampling, args.sparsity, args.gamma, args.seed)
        d = Path(args.dir)
        d.mkdir(parents=True, exist_ok=True)
        imaging.write_pgm(d / "phantom.pgm", prob.image)
        imaging.write_mask(d / "mask.pgm", prob.mask)
        print(d, file=sys.stderr)
        return 0
    if args.action == "reconstruct":
        return _reconstruct(args)
    specs = (_preset_specs(args, "imaging") if args.preset
             else [_spec_from_flags("imaging", args, FLAG_KEYS["imaging"])])
    return _write_records(specs, args)


def _reconstruct(args) -> int:
    if not args.dir:
        raise ParameterError("reconstruct needs --dir holding phantom.pgm and mask.pgm")
    d = Path(args.dir)
    image = imaging.read_sidecar(d / "phantom.pgm")
    mask = imaging.read_mask(d / "mask.pgm")
    prob = imaging.KSpaceProblem(image, mask, args.gamma)
    method = args.method[0]
    eta = args.eta[0] if args.eta else None
    rng = np.random.default_rng(args.seed)
    if method == "zerofill":
        rec = imaging.reconstruct_zero_fill(prob)
    elif method == "l1eq":
        rec = imaging.reconstruct_l1eq(prob)
    elif method == "lasso":
        rec = imaging.reconstruct_lasso(prob, 1e-4 if eta is None else eta)
    else:
        from ..hybrid import Backend, HybridConfig, RInit

        eta = 0.03 if eta is None else eta
        cfg = HybridConfig(args.eta_init or eta, eta, args.outer_iters or 30, RInit.LASSO, backend=Backend.MAXWELL)
        rec = imaging.reconstruct_l0(prob, cfg, rng)
    if args.image_out:
        imaging.write_pgm(args.image_out, np.clip(rec.image, 0.0, None) if rec.image.min() < 0 else rec.image)
    out = {"zerofill": Method.ZERO_FILL, "l1eq": Method.L1EQ, "lasso": Method.LASSO, "l0": Method.HYBRID_MAXWELL}
    record = RunRecord(out[method], args.seed, {"task": "imaging", "n": prob.n, "alpha": prob.sampling,
                                                 "eta": eta}, {"rmse": rec.rmse})
    with _output(args.out) as fh:
        RecordWriter(fh).write(record)
    return 0


def cmd_sweep(args) -> int:
    if args.preset:
        specs = _preset_specs(args, "sweep")
    elif args.sweeps:
        specs = [SweepSpec.from_json(s) for s in args.sweeps]
    else:
        raise ParameterError("sweep needs --preset or a --config file with sweep descriptions")
    return _write_records(specs, args)


def _run_task_command(command: str, args) -> int:
    if args.preset:
        return _write_records(_preset_specs(args, command), args)
    task = command
    if command == "solve-me":
        task = "me-optimal" if args.optimal else "me"
    return _write_records([_spec_from_flags(task, args, FLAG_KEYS[task])], args)


def _load_config(path, sub: argparse.ArgumentParser, command: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if command == "sweep" and (isinstance(data, list) or "task" in data):
        return {"sweeps": data if isinstance(data, list) else [data]}
    if not isinstance(data, dict):
        raise ParameterError("config must be a JSON object")
    dests = {a.dest for a in sub._actions} | ({"sweeps"} if command == "sweep" else set())
    for key in data:
        if key not in dests:
            raise ParameterError(f"config key {key!r} is not a flag of {command!r}")
    return {k: (float(v) if v in ("inf", "Infinity") else v) for k, v in data.items()}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            sub = subparsers[args.command]
            sub.set_defaults(**_load_config(args.config, sub, args.command))
            args = parser.parse_args(argv)
        if args.command == "sweep" and not hasattr(args, "sweeps"):
            args.sweeps = None
        if not 0 <= args.seed < 2 ** 64:
            raise ParameterError("--seed must be an unsigned 64-bit integer")
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "thresholds":
            return cmd_thresholds(args)
        if args.command == "scan-critical":
            return cmd_scan(args)
        if args.command == "imaging":
            return cmd_imaging(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return _run_task_command(args.command, args)
    except (ParameterError, ValueError, OSError) as exc:
        print(f"cimcs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
