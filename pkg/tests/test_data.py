import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catekit.data import (
    EvaluationSet,
    TrialDataset,
    assign_folds,
    make_folds,
    quantile,
    read_csv,
    write_csv,
)

from .conftest import make_trial


def test_dataset_validation():
    with pytest.raises(ValueError):
        TrialDataset(np.zeros((3, 2)), [0, 1, 2], [0, 0, 0])
    with pytest.raises(ValueError):
        TrialDataset(np.zeros((3, 2)), [0, 1], [0, 0, 0])
    ds = TrialDataset(np.zeros((3, 2)), [0, 1, 1], [0, 0, 0])
    assert ds.arm_sizes() == (1, 2)
    assert ds.column_names == ("x1", "x2")
    with pytest.raises(ValueError):
        ds.covariates[0, 0] = 1.0


def test_require_both_arms():
    ds = TrialDataset(np.zeros((3, 1)), [1, 1, 1], [0, 0, 0])
    with pytest.raises(ValueError, match="control=0"):
        ds.require_both_arms()


def test_evaluation_set_checks_mu_difference():
    EvaluationSet(np.zeros((2, 1)), [1.0, 2.0], [0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        EvaluationSet(np.zeros((2, 1)), [1.0, 2.0], [0.0, 0.0], [1.0, 2.5])


def test_make_folds_n6_each_fold_one_per_arm():
    ds = TrialDataset(np.arange(6.0)[:, None], [0, 1, 0, 1, 0, 1], np.zeros(6))
    folds = make_folds(ds, 3, seed=4)
    for k in range(3):
        arms = ds.treatment[folds.fold_of == k]
        assert sorted(arms) == [0.0, 1.0]


def test_make_folds_deterministic_and_sizes():
    ds = make_trial(100, seed=2)
    a, b = make_folds(ds, 3, 9), make_folds(ds, 3, 9)
    np.testing.assert_array_equal(a.fold_of, b.fold_of)
    assert sorted(a.sizes()) == [33, 33, 34]


def test_make_folds_falls_back_when_arm_small():
    ds = TrialDataset(np.arange(8.0)[:, None], [1, 0, 0, 0, 0, 0, 0, 0], np.zeros(8))
    with pytest.warns(UserWarning):
        folds = make_folds(ds, 3, 0)
    assert not folds.stratified


@given(st.integers(4, 200), st.integers(2, 4), st.integers(0, 1000))
def test_folds_partition_rows(n, k, seed):
    if n < 2 * k:
        return
    fold_of = assign_folds(n, k, seed, np.arange(n) % 2)
    sizes = np.bincount(fold_of, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    assert sizes.min() > 0
    rows = np.concatenate([np.flatnonzero(fold_of == j) for j in range(k)])
    assert sorted(rows) == list(range(n))


def test_quantile_examples():
    assert quantile(np.arange(1, 101), 0.5) == 50.5
    assert quantile(np.arange(11), math.sqrt(0.2)) == pytest.approx(10 * math.sqrt(0.2))
    assert quantile(np.full(7, 3.25), 0.3) == 3.25
    with pytest.raises(ValueError):
        quantile([1.0, 2.0], 1.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(0.01, 0.98),
       st.floats(0.0, 0.01), st.floats(-50, 50))
def test_quantile_monotone_and_shift_equivariant(vals, q, dq, c):
    v = np.array(vals)
    assert quantile(v, q) <= quantile(v, q + dq) + 1e-9
    assert quantile(v + c, q) == pytest.approx(quantile(v, q) + c, abs=1e-9)


def test_csv_round_trip(tmp_path):
    ds = make_trial(25, p=4, seed=3, tau=lambda X: X[:, 0], noise=1.0)
    tau = np.linspace(-1, 1, 25) / 3.0
    path = tmp_path / "trial.csv"
    write_csv(path, ds, tau=tau, mu0=np.zeros(25), mu1=tau)
    back, extras = read_csv(path)
    np.testing.assert_array_equal(back.covariates, ds.covariates)
    np.testing.assert_array_equal(back.treatment, ds.treatment)
    np.testing.assert_array_equal(back.outcome, ds.outcome)
    np.testing.assert_array_equal(extras["tau"], tau)
    assert set(extras) == {"tau", "mu0", "mu1"}


def test_csv_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,y\n1.0,2.0\n")
    with pytest.raises(ValueError, match="missing"):
        read_csv(path)
