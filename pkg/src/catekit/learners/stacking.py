"""Stacked generalisation: cross-fitted base predictions fed to a linear meta-fit."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from ..config import DEFAULTS
from ..numerics import as_matrix, as_vector, fit_nnls, fit_ols
from .base import keyed_folds, row_keys

log = logging.getLogger(__name__)


def with_seed(learner, seed: int):
    """Copy of a dataclass learner with its ``seed`` replaced."""
    if dataclasses.is_dataclass(learner) and hasattr(learner, "seed"):
        return dataclasses.replace(learner, seed=seed)
    return learner


@dataclass(frozen=True)
class FittedStack:
    members: tuple
    intercept: float
    coefficients: np.ndarray
    dropped: tuple[int, ...] = ()

    def base_predictions(self, X) -> np.ndarray:
        X = as_matrix(X)
        return np.column_stack([m.predict(X) for m in self.members])

    def predict(self, X) -> np.ndarray:
        return self.intercept + self.base_predictions(X) @ self.coefficients


def _nonneg_with_intercept(P, y, w):
    sw = w.sum()
    pbar = w @ P / sw
    ybar = w @ y / sw
    s = np.sqrt(w)[:, None]
    fit = fit_nnls(s * (P - pbar), s[:, 0] * (y - ybar))
    return float(ybar - pbar @ fit.coefficients), fit.coefficients


def fit_stacked_regressor(X, y, weights=None, base_set=(), k_folds=DEFAULTS.stack_folds,
                          seed=0, nonnegative=DEFAULTS.stack_nonnegative) -> FittedStack:
    """Stack ``base_set`` with out-of-fold predictions and an OLS meta-regression.

    A base learner that raises during fitting is dropped; the meta-regression
    uses the survivors.  ``nonnegative`` constrains meta-coefficients to be
    >= 0 (intercept stays free).
    """
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n)
    w = np.ones(n) if weights is None else as_vector(weights, n, "weights")
    base_set = list(base_set)
    if not base_set:
        raise ValueError("base_set must be non-empty")
    if n < 2 * k_folds:
        raise ValueError(f"n={n} too small for {k_folds}-fold stacking")
    fold_of = keyed_folds(row_keys(X, y), k_folds, seed)

    oof = np.zeros((n, len(base_set)))
    alive = []
    dropped = []
    for j, learner in enumerate(base_set):
        try:
            for k in range(k_folds):
                tr, va = fold_of != k, fold_of == k
                oof[va, j] = learner.fit(X[tr], y[tr], w[tr]).predict(X[va])
            if not np.all(np.isfinite(oof[:, j])):
                raise FloatingPointError("non-finite out-of-fold predictions")
            alive.append(j)
        except Exception as exc:  # noqa: BLE001 - any base failure drops the learner
            log.warning("dropping base learner %r: %s", learner, exc)
            dropped.append(j)
    if not alive:
        raise RuntimeError("every base learner failed to fit")

    P = oof[:, alive]
    if nonnegative:
        intercept, coef = _nonneg_with_intercept(P, y, w)
    else:
        meta = fit_ols(P, y, w)
        intercept, coef = meta.intercept, meta.coefficients
    members = tuple(base_set[j].fit(X, y, w) for j in alive)
    return FittedStack(members, float(intercept), np.asarray(coef), tuple(dropped))


@dataclass(frozen=True)
class StackedRegressor:
    base_set: tuple = ()
    k_folds: int = DEFAULTS.stack_folds
    nonnegative: bool = DEFAULTS.stack_nonnegative
    seed: int = 0

    def fit(self, X, y, weights=None) -> FittedStack:
        return fit_stacked_regressor(X, y, weights, self.base_set, self.k_folds, self.seed,
                                     self.nonnegative)
