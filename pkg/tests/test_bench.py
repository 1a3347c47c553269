import csv
import hashlib
import math

import numpy as np
import pytest

from catekit import zoo
from catekit.bench import cli
from catekit.bench.aggregate import aggregate, relative_excess
from catekit.bench.config import ConfigError, config_from_dict, derive_seed, load_config
from catekit.bench.runner import COLUMNS, RESULTS_FILE, ResultRow, read_results, run_benchmark, write_results
from catekit.dgp import gen_linear_family
from catekit.metrics import METRIC_NAMES

FAST = {
    "master_seed": 7,
    "n_grid": [60],
    "replicates": 2,
    "test_size": 120,
    "models": ["T-Linear", "T-EN", "Oracle"],
    "scenarios": [{"name": "lin", "generator": "linear", "preset": "linear-p10"}],
}


def write_toml(path, d):
    lines = [f"master_seed = {d['master_seed']}", f"n_grid = {d['n_grid']}",
             f"replicates = {d['replicates']}", f"test_size = {d['test_size']}",
             "models = [" + ", ".join(f'"{m}"' for m in d["models"]) + "]"]
    for s in d["scenarios"]:
        lines.append("[[scenarios]]")
        lines += [f'{k} = "{v}"' for k, v in s.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


# ------------------------------------------------------------------- config


def test_derive_seed_is_stable_blake2b():
    key = b"7|lin|60|1"
    expected = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") >> 1
    assert derive_seed(7, "lin", 60, 1) == expected
    assert derive_seed(7, "lin", 60, 1) != derive_seed(7, "lin", 60, 2)


@pytest.mark.parametrize("patch", [
    {"replicates": 0},
    {"n_grid": [40]},
    {"models": ["nope"]},
    {"models": []},
    {"scenarios": []},
    {"scenarios": [{"generator": "linear", "preset": "missing"}]},
    {"scenarios": [{"generator": "magic"}]},
    {"scenarios": [{"generator": "external", "path": "/nonexistent.csv"}]},
    {"scenarios": [{"generator": "pdl1", "params": {"d2": -1.0}}]},
])
def test_config_validation(patch):
    with pytest.raises(ConfigError):
        config_from_dict({**FAST, **patch})


def test_load_config_from_toml(tmp_path):
    cfg = load_config(write_toml(tmp_path / "c.toml", FAST))
    assert cfg.models == ("T-Linear", "T-EN", "Oracle")
    assert cfg.scenarios[0].p == 10
    (tmp_path / "bad.toml").write_text("n_grid = [")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")


# ------------------------------------------------------------------- runner


@pytest.fixture(scope="module")
def fast_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    summary = run_benchmark(config_from_dict(FAST), out)
    return summary, out / RESULTS_FILE


def test_run_counts_rows(fast_run):
    summary, path = fast_run
    assert summary.units == 6 and summary.exit_code == 0
    with open(path, newline="") as fh:
        recs = list(csv.reader(fh))
    assert tuple(recs[0]) == COLUMNS
    assert len(recs) - 1 == 6 * len(METRIC_NAMES)


def test_oracle_rows_are_zero(fast_run):
    _, path = fast_run
    oracle = [r for r in read_results(path) if r.model == "Oracle"]
    assert len(oracle) == 8
    assert all(r.value == 0.0 and r.status == "ok" for r in oracle)


def test_rerun_is_byte_identical(fast_run, tmp_path):
    _, path = fast_run
    run_benchmark(config_from_dict(FAST), tmp_path)
    assert (tmp_path / RESULTS_FILE).read_bytes() == path.read_bytes()


def test_resume_fills_missing_units(fast_run, tmp_path):
    _, path = fast_run
    rows = [r for r in read_results(path) if not (r.replicate == 1 and r.model == "T-EN")]
    write_results(tmp_path / RESULTS_FILE, rows)
    summary = run_benchmark(config_from_dict(FAST), tmp_path, resume=True)
    assert summary.skipped_units == 5
    assert (tmp_path / RESULTS_FILE).read_bytes() == path.read_bytes()


def test_two_workers_same_output(fast_run, tmp_path):
    _, path = fast_run
    run_benchmark(config_from_dict(FAST), tmp_path, workers=2)
    assert (tmp_path / RESULTS_FILE).read_bytes() == path.read_bytes()


def test_model_failure_is_recorded(tmp_path, monkeypatch):
    real = zoo._single

    def flaky(label, *args, **kw):
        if label == "T-EN":
            raise RuntimeError("simulated failure")
        return real(label, *args, **kw)

    monkeypatch.setattr(zoo, "_single", flaky)
    summary = run_benchmark(config_from_dict(FAST), tmp_path)
    assert summary.exit_code == 2 and summary.failed_units == 2
    failed = [r for r in read_results(tmp_path / RESULTS_FILE) if r.status == "failed"]
    assert {r.model for r in failed} == {"T-EN"} and len(failed) == 8
    assert all(math.isnan(r.value) for r in failed)


def test_result_row_round_trip():
    row = ResultRow("s", 3, 100, 2, "CBA", "rod", float("nan"), "degenerate", 12)
    rec = dict(zip(COLUMNS, row.as_csv()))
    back = ResultRow.from_csv(rec)
    assert back.unit == row.unit and math.isnan(back.value)


# ---------------------------------------------------------------- aggregate


def write_medians(path, medians, reps=3, scenario="pdl1", n=100):
    rows = []
    for model, med in medians.items():
        for rep, v in enumerate([med - 0.05, med, med + 0.1][:reps]):
            rows.append(ResultRow(scenario, 5, n, rep, model, "srmse", v, "ok", rep))
    write_results(path, rows)


def test_aggregate_table_example(tmp_path):
    medians = {"H-CF": 0.79, "Stacked-X": 0.81, "CBA": 0.81, "S-Boost": 1.20}
    write_medians(tmp_path / RESULTS_FILE, medians)
    result = aggregate(tmp_path, "srmse", tmp_path / "excess.csv")
    cell = result[("pdl1", 5, 100)]
    excess = {m: round(cell[m][1], 4) for m in cell}
    assert excess == {"H-CF": 0.0, "Stacked-X": 0.0253, "CBA": 0.0253, "S-Boost": 0.5190}
    assert (tmp_path / "excess.median.csv").exists()
    counts = (tmp_path / "excess.counts.csv").read_text().splitlines()
    assert counts[1].endswith("3,3,3,3")


def test_relative_excess_direct_and_edge_cases():
    got = relative_excess({"H-CF": 0.79, "Stacked-X": 0.81, "CBA": 0.81, "S": 1.20})
    assert got["H-CF"] == 0.0
    assert got["S"] == pytest.approx(0.5190, abs=5e-5)
    assert relative_excess({"only": 0.4}) == {"only": 0.0}
    assert relative_excess({"a": 0.0, "b": 0.3}) == {"a": 0.0, "b": math.inf}


def test_median_matches_order_statistic(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.uniform(0, 2, 7)
    rows = [ResultRow("s", 2, 50, r, "CF", "rod", float(v), "ok", r) for r, v in enumerate(vals)]
    rows.append(ResultRow("s", 2, 50, 7, "CF", "rod", float("nan"), "failed", 7))
    write_results(tmp_path / RESULTS_FILE, rows)
    result = aggregate(tmp_path, "rod", tmp_path / "t.csv")
    med, ex, count = result[("s", 2, 50)]["CF"]
    assert med == sorted(vals)[3] and ex == 0.0 and count == 7


def test_aggregate_all_failed_group_omitted(tmp_path):
    rows = [ResultRow("s", 2, 50, 0, "CF", "srmse", float("nan"), "failed", 0),
            ResultRow("s", 2, 50, 0, "CBA", "srmse", 0.5, "ok", 0)]
    write_results(tmp_path / RESULTS_FILE, rows)
    result = aggregate(tmp_path, "srmse", tmp_path / "t.csv")
    assert set(result[("s", 2, 50)]) == {"CBA"}


def test_excess_rows_have_single_zero(fast_run, tmp_path):
    _, path = fast_run
    result = aggregate(path, "srmse", tmp_path / "e.csv")
    for cell in result.values():
        ex = [v[1] for v in cell.values()]
        assert ex.count(0.0) == 1 and min(ex) >= 0


# ---------------------------------------------------------------------- CLI


def test_cli_run_and_aggregate(tmp_path, capsys):
    cfg = write_toml(tmp_path / "c.toml", {**FAST, "replicates": 1, "models": ["T-Linear", "Oracle"]})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "2 units" in capsys.readouterr().out
    assert cli.main(["aggregate", "--in", str(tmp_path / "o"), "--metric", "rod",
                     "--out", str(tmp_path / "agg.csv")]) == 0
    header = (tmp_path / "agg.csv").read_text().splitlines()[0]
    assert header == "scenario,p,n,T-Linear,Oracle"


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('models = ["nope"]\n')
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 1
    assert cli.main(["aggregate", "--in", str(tmp_path / "empty"), "--out",
                     str(tmp_path / "x.csv")]) == 1


# ---------------------------------------------------------------------- zoo


def test_every_model_label_fits_small_replicate():
    train, ev = gen_linear_family("slightly-nl-p10", 100, 3, test_size=50)
    z = zoo.ReplicateZoo(train, 3, ev)
    for label in zoo.MODEL_LABELS:
        pred = z.model(label).predict_cate(ev.covariates)
        assert pred.shape == (50,) and np.all(np.isfinite(pred)), label
    np.testing.assert_array_equal(z.model("Oracle").predict_cate(ev.covariates), ev.true_cate)
    with pytest.raises(KeyError):
        zoo.fit_model("CBA", train)


def test_cba_out_of_fold_flag_uses_crossfit_predictions():
    train, ev = gen_linear_family("linear-p10", 80, 4, test_size=40)
    members = ("T-Linear", "T-EN", "X-AGLM")
    full = zoo.ReplicateZoo(train, 4, ev, members=members)
    oof = zoo.ReplicateZoo(train, 4, ev, members=members, cba_out_of_fold=True)
    a = full.model("CBA").predict_cate(ev.covariates)
    b = oof.model("CBA").predict_cate(ev.covariates)
    assert np.all(np.isfinite(b)) and b.shape == a.shape
    assert oof._crossfit is not None and full._crossfit is None
