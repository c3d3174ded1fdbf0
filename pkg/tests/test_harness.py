import io
import json
import math

import pytest

from cimcs.harness import COLUMNS, Method, RecordWriter, RunRecord, SweepSpec, derive_seed, run_sweep, splitmix64, to_csv
from cimcs.harness.cli import main
from cimcs.harness.presets import PRESETS, preset
from cimcs.harness.records import parse_csv, strip_nondeterministic
from cimcs.meanfield import l1_weak_threshold
from cimcs.problem import Chi, ParameterError

from pathlib import Path

DATA = Path(__file__).parent / "data"
SMALL_LASSO = {"n": 40, "alpha": 0.6, "dist": "gaussian", "eta": 0.05}


def test_splitmix64_reference_value():
    # first output of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0) < 2 ** 64


def test_derived_seeds_distinct_and_stable():
    seeds = {derive_seed(7, p, t) for p in range(20) for t in range(20)}
    assert len(seeds) == 400
    assert derive_seed(7, 3, 4) == derive_seed(7, 3, 4)
    with pytest.raises(ParameterError):
        derive_seed(-1, 0, 0)


def test_grid_times_trials_record_count():
    spec = SweepSpec("lasso", SMALL_LASSO, {"a": [0.1, 0.2]}, trials=3)
    recs = list(run_sweep(spec, 11))
    assert len(recs) == 6
    assert [r.params["a"] for r in recs] == [0.1, 0.1, 0.1, 0.2, 0.2, 0.2]
    assert [r.params["trial"] for r in recs] == [0, 1, 2] * 2
    assert len({r.seed for r in recs}) == 6


def test_sweep_output_is_deterministic_and_worker_independent():
    spec = SweepSpec("lasso", SMALL_LASSO, {"a": [0.1, 0.2]}, trials=2)
    one = strip_nondeterministic(to_csv(run_sweep(spec, 5)))
    again = strip_nondeterministic(to_csv(run_sweep(spec, 5)))
    pooled = strip_nondeterministic(to_csv(run_sweep(spec, 5, workers=2)))
    assert one == again == pooled
    assert one != strip_nondeterministic(to_csv(run_sweep(spec, 6)))


def test_schema_matches_golden_file():
    assert ",".join(COLUMNS) == (DATA / "record_columns.txt").read_text().strip()
    text = to_csv(run_sweep(SweepSpec("lasso", {**SMALL_LASSO, "a": 0.1}), 0))
    assert text.splitlines()[0] == ",".join(COLUMNS)


@pytest.mark.slow
def test_fig3a_records_match_golden_schema():
    from cimcs.harness.tasks import execute
    header = (DATA / "record_columns.txt").read_text().strip()
    for spec in preset("fig3a", desk=True):
        task, params, seed, trial = spec.tasks(0)[0]
        if task == "hybrid":
            params = {**params, "outer_iters": 1}
        text = to_csv(execute(task, params, seed, trial))
        assert text.splitlines()[0] == header
        assert len(text.splitlines()) >= 2


def test_empty_cells_instead_of_nan():
    rec = RunRecord(Method.LASSO, 1, {"task": "lasso", "eta": math.nan}, {"rmse": None, "energy": math.inf})
    row = rec.row()
    assert row["eta"] == "" and row["rmse"] == "" and row["energy"] == "inf"
    assert row["converged"] == "true"
    out = io.StringIO()
    w = RecordWriter(out)
    assert out.getvalue().strip() == ",".join(COLUMNS)
    w.write(rec)
    assert "nan" not in out.getvalue().lower()
    with pytest.raises((KeyError, ValueError)):
        RunRecord(Method.LASSO, 1, {"bogus": 1}, {})


def test_csv_roundtrip():
    recs = list(run_sweep(SweepSpec("me", {"alpha": 0.6, "eta": 0.05}, {"a": [0.1, 0.2]}), 0))
    rows = parse_csv(to_csv(recs))
    assert [float(r["a"]) for r in rows] == [0.1, 0.2]
    assert float(rows[0]["rmse"]) == recs[0].metrics["rmse"]


@pytest.mark.parametrize("params,key", [
    ({"dist": "half_gaussian", "chi": "pm"}, "chi"),
    ({"dist": "cauchy"}, "dist"),
    ({"speed": 3}, "speed"),
])
def test_invalid_parameters_name_the_key(params, key):
    with pytest.raises(ParameterError, match=key):
        SweepSpec("lasso", params)


def test_spec_validation_and_json():
    with pytest.raises(ParameterError, match="'a'"):
        SweepSpec("lasso", {"a": 0.1}, {"a": [0.2]})
    with pytest.raises(ParameterError):
        SweepSpec("lasso", {}, {"a": []})
    with pytest.raises(ParameterError):
        SweepSpec("lasso", trials=0)
    spec = SweepSpec("lasso", SMALL_LASSO, {"a": [0.1, 0.2]}, 2)
    assert SweepSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec
    with pytest.raises(ParameterError):
        SweepSpec.from_json({"task": "lasso", "extra": 1})


@pytest.mark.parametrize("name", sorted(PRESETS))
@pytest.mark.parametrize("desk", [True, False])
def test_presets_validate(name, desk):
    specs = preset(name, desk)
    assert specs and all(len(s) > 0 for s in specs)


def test_cli_thresholds(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["thresholds", "--alpha", "0.3", "0.5", "--out", str(out)]) == 0
    rows = parse_csv(out.read_text())
    assert float(rows[1]["l1_signed"]) == l1_weak_threshold(0.5, Chi.SIGNED)
    assert float(rows[0]["l0"]) == 0.3


def test_cli_stdout_grid_and_trials(capsys):
    assert main(["lasso", "--n", "40", "--a", "0.1", "0.2", "--trials", "2", "--seed", "3", "--out", "-"]) == 0
    rows = parse_csv(capsys.readouterr().out)
    assert len(rows) == 4 and {r["method"] for r in rows} == {"Lasso"}


def test_cli_config_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": [0.6], "a": [0.1, 0.2], "eta": [0.05], "method": ["lasso"]}))
    assert main(["solve-me", "--config", str(cfg), "--a", "0.3"]) == 0
    rows = parse_csv(capsys.readouterr().out)
    assert [float(r["a"]) for r in rows] == [0.3]
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["solve-me", "--config", str(cfg)]) == 2
    assert "nonsense" in capsys.readouterr().err


def test_cli_sweep_config_file(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps([{"task": "me", "base": {"eta": 0.05}, "grid": {"a": [0.1, 0.2]}}]))
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert len(parse_csv(capsys.readouterr().out)) == 2


def test_cli_rejects_bad_input(capsys):
    assert main(["lasso", "--dist", "half_gaussian", "--chi", "pm"]) == 2
    assert "chi" in capsys.readouterr().err
    assert main(["lasso", "--seed", str(2 ** 64)]) == 2
    assert main(["synth"]) == 2


def test_cli_synth_and_imaging_files(tmp_path, capsys):
    assert main(["synth", "--n", "30", "--dir", str(tmp_path / "inst")]) == 0
    assert any((tmp_path / "inst").iterdir())
    d = tmp_path / "img"
    assert main(["imaging", "synth-phantom", "--size", "16", "--dir", str(d)]) == 0
    capsys.readouterr()
    assert main(["imaging", "reconstruct", "--size", "16", "--dir", str(d), "--method", "zerofill",
                 "--image-out", str(tmp_path / "rec.pgm")]) == 0
    rows = parse_csv(capsys.readouterr().out)
    assert rows[0]["method"] == "ZeroFill" and float(rows[0]["rmse"]) > 0
    assert (tmp_path / "rec.f64").exists()
