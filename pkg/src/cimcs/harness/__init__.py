"""Experiment orchestration: seeded sweeps, figure presets, CSV records and the command line."""

from ..meanfield import grid_search_optimal_eta
from .presets import PRESETS, preset
from .records import COLUMNS, Method, RecordWriter, RunRecord, to_csv
from .sweep import SweepSpec, derive_seed, load_specs, run_sweep, splitmix64

__all__ = [
    "COLUMNS", "Method", "PRESETS", "RecordWriter", "RunRecord", "SweepSpec", "derive_seed",
    "grid_search_optimal_eta", "load_specs", "preset", "run_sweep", "splitmix64", "to_csv",
]
