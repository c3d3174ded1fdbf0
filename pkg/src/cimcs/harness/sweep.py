"""Seeded Cartesian sweeps over task parameters.

Seed derivation
---------------
Every (grid point, trial) task gets the seed::

    derive_seed(base, point, trial) = mix(mix(mix(base) ^ point) ^ trial)

where ``point`` is the row-major index of the grid point and ``mix`` is the
splitmix64 finalizer on unsigned 64-bit integers::

    x = x + 0x9E3779B97F4A7C15
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB
    x = x ^ (x >> 31)

with all arithmetic modulo 2**64. It uses only integer operations, so seeds
are identical on every platform.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

from ..problem import ParameterError
from .records import RecordWriter, RunRecord
from .tasks import check_params, execute

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, point: int, trial: int) -> int:
    if not 0 <= base <= MASK64:
        raise ParameterError("base seed must be an unsigned 64-bit integer")
    return splitmix64(splitmix64(splitmix64(base) ^ point) ^ trial)


@dataclass(frozen=True)
class SweepSpec:
    """A task kind, fixed parameters, a grid of varied parameters and a trial count.

    JSON form::

        {"task": "hybrid", "base": {"n": 200}, "grid": {"a": [0.1, 0.2]}, "trials": 3}

    Grid keys vary in the order given, the last one fastest; trials are the
    innermost loop.
    """

    task: str
    base: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    trials: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("key 'trials': need at least one trial")
        for key, values in self.grid.items():
            if isinstance(values, (str, bytes)) or not hasattr(values, "__iter__"):
                raise ParameterError(f"key {key!r}: grid values must be a list")
            if len(list(values)) == 0:
                raise ParameterError(f"key {key!r}: empty grid")
            if key in self.base:
                raise ParameterError(f"key {key!r} appears in both base and grid")
        for point in self.points():
            check_params(self.task, point)

    def points(self) -> list[dict]:
        keys = list(self.grid)
        combos = itertools.product(*(list(self.grid[k]) for k in keys))
        return [{**self.base, **dict(zip(keys, combo))} for combo in combos]

    def tasks(self, base_seed: int) -> list[tuple[str, dict, int, int]]:
        return [(self.task, point, derive_seed(base_seed, i, t), t)
                for i, point in enumerate(self.points()) for t in range(self.trials)]

    def __len__(self) -> int:
        return len(self.points()) * self.trials

    @classmethod
    def from_json(cls, d: dict) -> "SweepSpec":
        unknown = set(d) - {"task", "base", "grid", "trials"}
        if unknown:
            raise ParameterError(f"key {sorted(unknown)[0]!r} is not a sweep field")
        if "task" not in d:
            raise ParameterError("key 'task' is required")
        return cls(d["task"], dict(d.get("base", {})), dict(d.get("grid", {})), int(d.get("trials", 1)))

    def to_json(self) -> dict:
        return {"task": self.task, "base": self.base, "grid": self.grid, "trials": self.trials}


def load_specs(path) -> list[SweepSpec]:
    """Sweep specs from a JSON file holding one spec or a list of them."""
    with open(path) as fh:
        data = json.load(fh)
    return [SweepSpec.from_json(d) for d in (data if isinstance(data, list) else [data])]


def _run_one(args):
    return execute(*args)


def run_sweep(specs, base_seed: int = 0, *, writer: RecordWriter | None = None,
              workers: int = 1) -> Iterator[RunRecord]:
    """Run every task of ``specs`` and yield the records in task order.

    With ``workers > 1`` the tasks run in a process pool; results are still
    emitted (and written) in task order, so the output does not depend on
    scheduling. Each task builds its own generator from its derived seed.
    """
    if isinstance(specs, SweepSpec):
        specs = [specs]
    tasks = [t for spec in specs for t in spec.tasks(base_seed)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for recs in pool.map(_run_one, tasks, chunksize=1):
                yield from _emit(recs, writer)
    else:
        for t in tasks:
            yield from _emit(_run_one(t), writer)


def _emit(records, writer):
    for rec in records:
        if writer is not None:
            writer.write(rec)
        yield rec
