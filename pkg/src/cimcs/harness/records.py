"""Result rows and their CSV form.

Every row has the same columns (``COLUMNS``), in that order. Parameters that
do not apply to a run and metrics a failed run could not produce are written
as empty cells; NaN never appears.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

PARAM_COLUMNS = (
    "task", "trial", "instance_seed", "n", "alpha", "a", "beta", "dist", "chi",
    "eta", "eta_init", "eta_end", "as2", "r_init", "schedule",
)
METRIC_COLUMNS = (
    "rmse", "direction_cosine", "energy", "iterations", "converged",
    "r_overlap", "q_mag", "u_susc", "branch",
)
COLUMNS = ("method", "seed") + PARAM_COLUMNS + METRIC_COLUMNS + ("wall_time_ms",)
#: columns that may differ between two runs with the same seed
NONDETERMINISTIC = ("wall_time_ms",)


class Method(str, enum.Enum):
    HYBRID_CIM = "HybridCIM"
    HYBRID_MAXWELL = "HybridMaxwell"
    LASSO = "Lasso"
    SA = "SA"
    ME_CIM_FINITE = "MEcimFinite"
    ME_CIM_INF = "MEcimInf"
    ME_LASSO = "MElasso"
    L1EQ = "L1Eq"
    ZERO_FILL = "ZeroFill"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


@dataclass
class RunRecord:
    method: Method
    seed: int
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0

    def __post_init__(self):
        self.method = Method(self.method)
        for key in self.params:
            if key not in PARAM_COLUMNS:
                raise KeyError(f"unknown parameter column {key!r}")
        for key in self.metrics:
            if key not in METRIC_COLUMNS:
                raise KeyError(f"unknown metric column {key!r}")
        if "converged" not in self.metrics:
            self.metrics["converged"] = True

    @property
    def converged(self) -> bool:
        return bool(self.metrics.get("converged", True))

    def row(self) -> dict[str, str]:
        out = {"method": self.method.value, "seed": str(int(self.seed))}
        for key in PARAM_COLUMNS:
            out[key] = _cell(self.params.get(key))
        for key in METRIC_COLUMNS:
            out[key] = _cell(self.metrics.get(key))
        out["wall_time_ms"] = f"{self.wall_time_ms:.3f}"
        return out


class RecordWriter:
    """Streams records as CSV, flushing after every row so a partial file is a valid prefix."""

    def __init__(self, stream):
        self.stream = stream
        self._writer = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator="\n")
        self._writer.writeheader()
        self.count = 0
        stream.flush()

    def write(self, record: RunRecord) -> None:
        self._writer.writerow(record.row())
        self.stream.flush()
        self.count += 1


def to_csv(records, *, drop=()) -> str:
    """CSV text of ``records``; columns named in ``drop`` are left out."""
    cols = [c for c in COLUMNS if c not in drop]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def parse_csv(text: str) -> list[dict[str, str]]:
    """Rows of record CSV text as dictionaries of strings."""
    return list(csv.DictReader(io.StringIO(text)))


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


def strip_nondeterministic(text: str) -> str:
    """Record CSV with the wall-time column removed, for determinism comparisons."""
    rows = parse_csv(text)
    cols = [c for c in COLUMNS if c not in NONDETERMINISTIC]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
