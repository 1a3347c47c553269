"""Linear regressors behind the Regressor contract."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import DEFAULTS
from ..numerics import EnetProblem, LinearFit, as_matrix, as_vector, fit_elastic_net, fit_ols
from .base import keyed_folds, row_keys


@dataclass(frozen=True)
class LinearRegression:
    seed: int = 0

    def fit(self, X, y, weights=None) -> LinearFit:
        return fit_ols(X, y, weights)


@dataclass(frozen=True)
class ElasticNet:
    lambda1: float = 0.0
    lambda2: float = 0.0
    seed: int = 0

    def fit(self, X, y, weights=None) -> LinearFit:
        return fit_elastic_net(X, y, self.lambda1, self.lambda2, weights)


def penalty_path(lambda_max: float, n: int = DEFAULTS.lambda_grid_size,
                 ratio: float = DEFAULTS.lambda_min_ratio) -> np.ndarray:
    top = max(lambda_max, 1e-12)
    return np.geomspace(top, top * ratio, n)


def cv_penalty(X, y, weights, l1_ratio: float, k_folds: int, seed: int,
               n_lambdas: int = DEFAULTS.lambda_grid_size) -> tuple[float, EnetProblem, np.ndarray]:
    """k-fold CV over a log-spaced total-penalty path.

    The total penalty ``alpha`` splits as ``lambda1 = alpha * l1_ratio`` and
    ``lambda2 = alpha * (1 - l1_ratio)``.  Returns the chosen ``alpha``, the
    full-data problem and its warm-started solution at that ``alpha``.
    """
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n)
    w = np.ones(n) if weights is None else as_vector(weights, n, "weights")
    full = EnetProblem(X, y, w)
    # shallower path when columns outnumber rows, where tiny penalties barely converge
    fold_rows = n * (k_folds - 1) // max(k_folds, 1)
    ratio = DEFAULTS.lambda_min_ratio if fold_rows > X.shape[1] else DEFAULTS.lambda_min_ratio_wide
    alphas = penalty_path(full.lambda_max() / max(l1_ratio, 1e-3), n_lambdas, ratio)
    loss = np.zeros(alphas.size)
    if n >= 2 * k_folds:
        fold_of = keyed_folds(row_keys(X, y), k_folds, seed)
        for k in range(k_folds):
            tr, va = fold_of != k, fold_of == k
            if w[tr].sum() <= 0:
                continue
            prob = EnetProblem(X[tr], y[tr], w[tr])
            beta = None
            for i, a in enumerate(alphas):
                beta, _, _ = prob.solve(a * l1_ratio, a * (1 - l1_ratio), beta)
                pred = prob.to_fit(beta).predict(X[va])
                loss[i] += float(w[va] @ (y[va] - pred) ** 2)
    best = int(np.argmin(loss))
    beta = None
    for a in alphas[: best + 1]:
        beta, sweeps, ok = full.solve(a * l1_ratio, a * (1 - l1_ratio), beta)
    return float(alphas[best]), full, beta


@dataclass(frozen=True)
class ElasticNetCV:
    """Elastic net with the total penalty chosen by k-fold CV."""

    l1_ratio: float = DEFAULTS.enet_l1_ratio
    k_folds: int = DEFAULTS.cv_folds
    n_lambdas: int = DEFAULTS.lambda_grid_size
    seed: int = 0

    def fit(self, X, y, weights=None) -> LinearFit:
        _, prob, beta = cv_penalty(X, y, weights, self.l1_ratio, self.k_folds, self.seed,
                                   self.n_lambdas)
        return prob.to_fit(beta)
