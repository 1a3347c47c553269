import itertools
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catekit.data import TrialDataset, make_folds
from catekit.ensembles import (
    ConsensusDiagnostics,
    LinearEnsembleModel,
    causal_stacking_pseudo_outcome,
    cba_combine,
    crossfit_member_predictions,
    fit_causal_stacking,
    fit_r_stacking,
    fit_t_stacking,
    knee_index,
    r_stacking_objective,
)
from catekit.learners import LinearRegression
from catekit.metalearners import CateModel, NuisanceSet, fit_t_learner
from catekit.numerics import fit_ols

from .conftest import make_trial


def simplex_grid(d, step=0.02):
    k = int(round(1 / step))
    pts = [c for c in itertools.product(range(k + 1), repeat=d - 1) if sum(c) <= k]
    return np.array([[*c, k - sum(c)] for c in pts], dtype=float) / k


class Fixed(CateModel):
    def __init__(self, fn, label="fixed"):
        self.fn, self.label = fn, label

    def predict_cate(self, X):
        return self.fn(np.asarray(X))


def planted_setup(n=200, seed=0):
    """Noiseless trial, exact nuisances, one member equal to the true effect."""
    prog = lambda X: np.sin(X[:, 1])  # noqa: E731
    tau = lambda X: 1.0 + X[:, 0]  # noqa: E731
    ds = make_trial(n, p=3, seed=seed, prog=prog, tau=tau)
    X = ds.covariates
    nu = NuisanceSet(make_folds(ds, 3, 0), prog(X) + 0.5 * tau(X), np.full(n, 0.5),
                     prog(X), prog(X) + tau(X))
    rng = np.random.default_rng(seed + 1)
    P = np.column_stack([X[:, 2], tau(X), rng.standard_normal(n), 0.5 * tau(X) + X[:, 1]])
    return ds, nu, P, tau(X)


# ---------------------------------------------------------------- cross-fit


def test_crossfit_identical_factories_identical_columns():
    ds = make_trial(60, seed=1, tau=lambda X: X[:, 0], noise=1.0)
    factory = lambda d: fit_t_learner(d, LinearRegression())  # noqa: E731
    mp = crossfit_member_predictions(ds, [factory, factory], labels=["a", "b"])
    np.testing.assert_array_equal(mp.oof[:, 0], mp.oof[:, 1])
    assert mp.labels == ("a", "b")


class Memorizer(CateModel):
    """Predicts 1 for covariate rows it was trained on, 0 otherwise."""

    def __init__(self, ds):
        self.seen = {tuple(r) for r in ds.covariates}

    def predict_cate(self, X):
        return np.array([float(tuple(r) in self.seen) for r in np.asarray(X)])


def test_crossfit_out_of_fold_contract():
    ds = TrialDataset(np.arange(4.0)[:, None], [0, 1, 0, 1], np.zeros(4))
    mp = crossfit_member_predictions(ds, [Memorizer, Memorizer], k_folds=2)
    np.testing.assert_array_equal(mp.oof, 0.0)
    np.testing.assert_array_equal(mp.full_data(ds.covariates), 1.0)


def test_crossfit_column_order_and_drop(caplog):
    ds = make_trial(30, seed=2)

    def bad(d):
        raise RuntimeError("nope")

    members = [lambda d: Fixed(lambda X: X[:, 0]), bad, lambda d: Fixed(lambda X: X[:, 1])]
    with caplog.at_level(logging.WARNING):
        mp = crossfit_member_predictions(ds, members, labels=["x0", "bad", "x1"])
    assert mp.labels == ("x0", "x1") and mp.dropped == ("bad",)
    np.testing.assert_array_equal(mp.oof, ds.covariates[:, :2])
    assert "bad" in caplog.text
    with pytest.raises(RuntimeError):
        crossfit_member_predictions(ds, [bad, members[0]])


def test_crossfit_without_refit():
    ds = make_trial(30, seed=2)
    mp = crossfit_member_predictions(ds, [lambda d: Fixed(lambda X: X[:, 0])] * 2, refit=False)
    assert mp.fitted is None
    with pytest.raises(ValueError):
        mp.full_data(ds.covariates)


# --------------------------------------------------------------- R-stacking


def test_r_stacking_planted_oracle():
    ds, nu, P, _ = planted_setup()
    fit = fit_r_stacking(ds, P, nu)
    assert fit.weights[1] == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_allclose(fit.weights[[0, 2, 3]], 0.0, atol=1e-4)
    assert fit.b == pytest.approx(0.0, abs=1e-4) and fit.c == pytest.approx(0.0, abs=1e-4)


def test_r_stacking_zero_members_is_residual_slope(rng):
    ds = make_trial(80, seed=3, tau=lambda X: X[:, 0], noise=1.0)
    nu = NuisanceSet(make_folds(ds, 2, 0), rng.standard_normal(80), rng.uniform(0.3, 0.7, 80))
    fit = fit_r_stacking(ds, np.zeros((80, 2)), nu)
    ols = fit_ols((ds.treatment - nu.oof_pi)[:, None], ds.outcome - nu.oof_m)
    assert fit.c == pytest.approx(ols.coefficients[0], abs=1e-10)
    assert fit.b == pytest.approx(ols.intercept, abs=1e-10)


def test_r_stacking_beats_ate_point_and_vertices(rng):
    ds = make_trial(150, seed=4, tau=lambda X: X[:, 0] ** 2, prog=lambda X: X[:, 1], noise=1.0)
    nu = NuisanceSet(make_folds(ds, 3, 0), ds.covariates[:, 1] + 0.5, np.full(150, 0.5))
    P = np.column_stack([ds.covariates[:, 0], np.abs(ds.covariates[:, 0]), rng.standard_normal(150)])
    fit = fit_r_stacking(ds, P, nu)
    ry, ra = ds.outcome - nu.oof_m, ds.treatment - nu.oof_pi
    ate = ds.outcome[ds.treatment == 1].mean() - ds.outcome[ds.treatment == 0].mean()
    assert fit.objective <= r_stacking_objective(ry, ra, P, 0.0, ate, np.zeros(3)) + 1e-12
    assert np.all(fit.weights >= 0)
    for k in range(3):
        # best free (b, c) for the vertex alpha = e_k
        Z = np.column_stack([np.ones(150), ra])
        (b, c), *_ = np.linalg.lstsq(Z, ry - P[:, k] * ra, rcond=None)
        alpha = np.eye(3)[k]
        assert fit.objective <= r_stacking_objective(ry, ra, P, b, c, alpha) + 1e-12


# ---------------------------------------------------------- causal stacking


def test_causal_pseudo_outcome_plug_in():
    y = np.array([1.5, -1.0, 2.0])
    a = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(causal_stacking_pseudo_outcome(y, a, 0.0, 0.0, 0.5),
                               [3.0, 2.0, -4.0])
    with pytest.raises(ValueError):
        causal_stacking_pseudo_outcome(y, a, 0.0, 0.0, 1.0)


def test_causal_stacking_perfect_column(rng):
    ds = make_trial(50, seed=5, noise=1.0)
    mu0, mu1 = rng.standard_normal(50), rng.standard_normal(50)
    target = causal_stacking_pseudo_outcome(ds.outcome, ds.treatment, mu0, mu1, 0.5)
    P = np.column_stack([rng.standard_normal(50), target, rng.standard_normal(50)])
    fit = fit_causal_stacking(ds, P, mu0, mu1)
    np.testing.assert_allclose(fit.weights, [0.0, 1.0, 0.0], atol=1e-8)


def test_causal_stacking_planted_noiseless():
    ds, nu, P, _ = planted_setup(seed=3)
    fit = fit_causal_stacking(ds, P, nu.oof_mu0, nu.oof_mu1)
    assert fit.weights[1] >= 0.95


def test_causal_stacking_grid_oracle_n50():
    rng = np.random.default_rng(50)
    ds = make_trial(50, seed=50, tau=lambda X: X[:, 0], noise=1.0)
    mu0, mu1 = rng.standard_normal(50) * 0.1, rng.standard_normal(50) * 0.1
    P = rng.standard_normal((50, 3))
    fit = fit_causal_stacking(ds, P, mu0, mu1)
    target = causal_stacking_pseudo_outcome(ds.outcome, ds.treatment, mu0, mu1, 0.5)
    grid = simplex_grid(3)
    best = np.min(np.mean((target[:, None] - P @ grid.T) ** 2, axis=0))
    assert fit.objective <= best + 1e-12


@given(st.integers(0, 10_000))
def test_causal_stacking_weights_on_simplex(seed):
    rng = np.random.default_rng(seed)
    ds = make_trial(30, seed=seed, noise=1.0)
    fit = fit_causal_stacking(ds, rng.standard_normal((30, 4)), np.zeros(30), np.zeros(30))
    assert np.all(fit.weights >= 0)
    assert abs(fit.weights.sum() - 1.0) <= 1e-8


# --------------------------------------------------------------- T-stacking


def test_t_stacking_member_equal_to_target(rng):
    ds = make_trial(40, seed=6)
    target = rng.standard_normal(40)
    P = np.column_stack([rng.standard_normal(40), target])
    np.testing.assert_allclose(fit_t_stacking(ds, P, target).weights, [0.0, 1.0], atol=1e-10)


def test_t_stacking_zero_target(rng):
    ds = make_trial(40, seed=6)
    fit = fit_t_stacking(ds, rng.standard_normal((40, 3)), np.zeros(40))
    np.testing.assert_array_equal(fit.weights, 0.0)
    np.testing.assert_array_equal(fit.training_prediction, 0.0)


def test_t_stacking_planted_with_nuisance_target():
    ds, nu, P, _ = planted_setup(seed=4)
    fit = fit_t_stacking(ds, P, nu)
    assert fit.weights[1] >= 0.95
    with pytest.raises(ValueError):
        fit_t_stacking(ds, P, NuisanceSet(nu.folds, nu.oof_m, nu.oof_pi))


@given(st.integers(0, 10_000))
def test_t_stacking_kkt(seed):
    rng = np.random.default_rng(seed)
    ds = make_trial(25, seed=seed)
    P, target = rng.standard_normal((25, 3)), rng.standard_normal(25)
    alpha = fit_t_stacking(ds, P, target).weights
    grad = P.T @ (P @ alpha - target)
    scale = 1 + np.abs(P.T @ target).max()
    assert np.all(alpha >= 0)
    assert np.all(grad >= -1e-8 * scale)
    assert np.all(np.abs(grad[alpha > 0]) <= 1e-8 * scale)


def test_stacking_vertices_never_better(rng):
    ds = make_trial(60, seed=7, tau=lambda X: X[:, 0], noise=1.0)
    P = rng.standard_normal((60, 3))
    target = rng.standard_normal(60)
    fit = fit_t_stacking(ds, P, target)
    for k in range(3):
        assert fit.objective <= np.mean((target - P[:, k]) ** 2) + 1e-12
    cs = fit_causal_stacking(ds, P, np.zeros(60), np.zeros(60))
    po = causal_stacking_pseudo_outcome(ds.outcome, ds.treatment, 0.0, 0.0, 0.5)
    for k in range(3):
        assert cs.objective <= np.mean((po - P[:, k]) ** 2) + 1e-12


def test_stacking_combined_model_predicts_weighted_sum():
    ds, nu, P, _ = planted_setup(seed=5)
    members = [Fixed(lambda X, k=k: X[:, k % 3] * (k + 1)) for k in range(4)]
    P = np.column_stack([m.predict_cate(ds.covariates) for m in members])
    fit = fit_r_stacking(ds, P, nu, members=members)
    assert isinstance(fit.combined, LinearEnsembleModel)
    np.testing.assert_allclose(fit.combined.predict_cate(ds.covariates), fit.training_prediction,
                               atol=1e-12)
    with pytest.raises(ValueError):
        fit_t_stacking(ds, P, np.zeros(ds.n), members=members[:2])


# ---------------------------------------------------------------------- CBA


def test_cba_two_identical_one_reversed():
    v = np.array([0.3, -1.0, 2.0, 0.7, 1.1])
    P = np.column_stack([v, v, -v])
    fit, diag = cba_combine(P, ["a", "b", "rev"])
    np.testing.assert_allclose(diag.tau_matrix, [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])
    np.testing.assert_allclose(diag.mean_corr, [0.0, 0.0, -1.0])
    assert diag.knee_index == 2
    assert fit.selected == ("a", "b")
    np.testing.assert_array_equal(fit.training_prediction, v)


def test_cba_all_identical_members():
    v = np.array([1.0, 3.0, 2.0])
    fit, diag = cba_combine(np.column_stack([v] * 4))
    assert diag.knee_index == 1  # all gaps zero, the first index wins
    np.testing.assert_array_equal(fit.training_prediction, v)


def test_cba_two_members_average():
    P = np.column_stack([[1.0, 2.0, 3.0], [3.0, 1.0, 2.0]])
    fit, diag = cba_combine(P)
    assert diag.knee_index == 2
    np.testing.assert_allclose(fit.training_prediction, P.mean(axis=1))


def test_cba_constant_members():
    v = np.array([1.0, 2.0, 4.0, 3.0])
    fit, diag = cba_combine(np.column_stack([v, np.full(4, 5.0), v + 1, -v]), list("abcd"))
    assert diag.dropped == ("b",)
    assert "b" not in fit.selected
    # fewer than two non-constant members: plain average of everything
    fit, diag = cba_combine(np.column_stack([v, np.full(4, 5.0), np.full(4, 1.0)]))
    assert diag.fallback
    np.testing.assert_allclose(fit.training_prediction, (v + 6.0) / 3)


def test_knee_index_rules():
    assert knee_index([0.9, 0.8, 0.2, 0.1]) == 2
    assert knee_index([0.5, 0.5]) == 2
    assert knee_index([0.9, 0.5, 0.1]) == 1  # tie between gaps: earliest
    assert knee_index([1.0]) == 1


member_matrices = st.integers(0, 10_000).map(
    lambda s: np.random.default_rng(s).standard_normal((20, 5)) @ np.diag([1, 1, 2, 3, 1.0])
)


@given(member_matrices, st.sampled_from([np.exp, np.arctan, lambda z: z ** 3 + 2 * z]))
def test_cba_selection_invariant_under_monotone_transform(P, transform):
    a, _ = cba_combine(P)
    b, _ = cba_combine(transform(P))
    assert a.selected == b.selected


@given(member_matrices)
def test_cba_output_is_convex_combination(P):
    fit, diag = cba_combine(P)
    assert np.all(fit.training_prediction >= P.min(axis=1) - 1e-12)
    assert np.all(fit.training_prediction <= P.max(axis=1) + 1e-12)
    np.testing.assert_array_equal(diag.tau_matrix, diag.tau_matrix.T)
    np.testing.assert_array_equal(np.diag(diag.tau_matrix), 1.0)
    assert len(fit.selected) >= 1


def test_diagnostics_csv(tmp_path):
    v = np.array([0.3, -1.0, 2.0, 0.7])
    _, diag = cba_combine(np.column_stack([v, v, -v, np.zeros(4)]), ["a", "b", "c", "z"])
    assert isinstance(diag, ConsensusDiagnostics)
    path = tmp_path / "diag.csv"
    diag.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "label,mean_corr,rank,selected,a,b,c"
    assert rows[1].startswith("a,0.0,1,1,")
    assert rows[-1].startswith("z,,,0")
