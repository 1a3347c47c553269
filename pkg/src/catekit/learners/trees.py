"""CART regression trees, random forests and squared-loss gradient boosting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..config import DEFAULTS
from ..numerics import as_matrix, as_vector
from .base import keyed_folds, mix_scalar, resample, row_keys


@dataclass(frozen=True)
class TreeArrays:
    """Flat node arrays of a fitted binary tree; ``feature == -1`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    improvement: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.apply_tree(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def parents(self) -> np.ndarray:
        parent = np.full(self.n_nodes, -1, dtype=np.int64)
        internal = np.flatnonzero(self.feature >= 0)
        parent[self.left[internal]] = internal
        parent[self.right[internal]] = internal
        return parent


def grow(X, y, weights=None, *, max_depth=None, min_leaf=1, mtry=None, seed=0,
         criterion=kernels.CRIT_MSE, treat_resid=None, arm=None) -> TreeArrays:
    """Grow one tree on ``(X, y)`` with the active kernel backend.

    Split candidates are midpoints between consecutive distinct values; ties
    in split score go to the lowest feature index, then the lowest threshold.
    With ``criterion=CRIT_CAUSAL``, ``y`` and ``treat_resid`` are the outcome
    and treatment residuals and ``arm`` the 0/1 treatment.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    m, p = X.shape
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ones(m) if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    t = np.zeros(m) if treat_resid is None else np.ascontiguousarray(treat_resid, dtype=np.float64)
    a = np.zeros(m, dtype=np.int64) if arm is None else np.ascontiguousarray(arm, dtype=np.int64)
    mtry = p if mtry is None else int(min(max(mtry, 1), p))
    depth = -1 if max_depth is None else int(max_depth)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    arrays = kernels.grow_tree(X, y, t, a, w, order, int(criterion), depth, int(min_leaf),
                               mtry, int(seed) & ((1 << 64) - 1))
    return TreeArrays(*arrays)


# ------------------------------------------------------------------ single tree


@dataclass(frozen=True)
class FittedTree:
    tree: TreeArrays

    def predict(self, X) -> np.ndarray:
        return self.tree.predict(as_matrix(X))


def fit_regression_tree(X, y, weights=None, max_depth=None, min_leaf=5, seed=0) -> FittedTree:
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    return FittedTree(grow(X, y, weights, max_depth=max_depth, min_leaf=min_leaf, seed=seed))


@dataclass(frozen=True)
class RegressionTree:
    max_depth: int | None = None
    min_leaf: int = 5
    seed: int = 0

    def fit(self, X, y, weights=None) -> FittedTree:
        return fit_regression_tree(X, y, weights, self.max_depth, self.min_leaf, self.seed)


# ---------------------------------------------------------------- random forest


@dataclass(frozen=True)
class FittedForest:
    trees: tuple[TreeArrays, ...]

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def fit_random_forest(X, y, weights=None, n_trees=DEFAULTS.forest_trees, mtry=None,
                      min_leaf=DEFAULTS.forest_min_leaf, subsample=1.0, seed=0,
                      bootstrap=True, max_depth=None) -> FittedForest:
    """Average of CART trees on resampled rows with per-node feature sampling.

    ``bootstrap=True`` draws Poisson(``subsample``) multiplicities per row;
    otherwise ``round(subsample * n)`` rows are drawn without replacement.
    """
    X = as_matrix(X)
    n, p = X.shape
    y = as_vector(y, n)
    w = np.ones(n) if weights is None else as_vector(weights, n, "weights")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = max(1, math.ceil(p / 3)) if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise ValueError("mtry must lie in [1, p]")
    keys = row_keys(X, y)
    trees = []
    for b in range(n_trees):
        rows, counts = resample(keys, seed, b, subsample, bootstrap)
        trees.append(grow(X[rows], y[rows], w[rows] * counts, max_depth=max_depth,
                          min_leaf=min_leaf, mtry=mtry, seed=mix_scalar(seed, b, 1)))
    return FittedForest(tuple(trees))


@dataclass(frozen=True)
class RandomForest:
    n_trees: int = DEFAULTS.forest_trees
    mtry: int | None = None
    min_leaf: int = DEFAULTS.forest_min_leaf
    subsample: float = 1.0
    bootstrap: bool = True
    max_depth: int | None = None
    seed: int = 0

    def fit(self, X, y, weights=None) -> FittedForest:
        return fit_random_forest(X, y, weights, self.n_trees, self.mtry, self.min_leaf,
                                 self.subsample, self.seed, self.bootstrap, self.max_depth)


# ------------------------------------------------------------ gradient boosting


@dataclass(frozen=True)
class FittedBoosting:
    init: float
    learning_rate: float
    trees: tuple[TreeArrays, ...]

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        out = np.full(X.shape[0], self.init)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def staged_predict(self, X, rounds):
        """Predictions after each requested number of rounds."""
        X = as_matrix(X)
        out = np.full(X.shape[0], self.init)
        wanted = sorted(set(rounds))
        staged = {}
        for r, tree in enumerate(self.trees, start=1):
            out += self.learning_rate * tree.predict(X)
            if r in wanted:
                staged[r] = out.copy()
        return staged


def fit_gradient_boosting(X, y, weights=None, n_rounds=DEFAULTS.boosting_rounds,
                          learning_rate=DEFAULTS.boosting_learning_rate,
                          max_depth=DEFAULTS.boosting_depth, min_leaf=DEFAULTS.boosting_min_leaf,
                          subsample=DEFAULTS.boosting_subsample, seed=0) -> FittedBoosting:
    """Squared-loss boosting: start at the weighted mean, add shrunken residual trees."""
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n)
    w = np.ones(n) if weights is None else as_vector(weights, n, "weights")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must lie in (0, 1]")
    init = float(w @ y / w.sum())
    F = np.full(n, init)
    keys = row_keys(X, y)
    trees = []
    for r in range(n_rounds):
        rows, _ = resample(keys, seed, r, subsample, replace=False)
        tree = grow(X[rows], (y - F)[rows], w[rows], max_depth=max_depth, min_leaf=min_leaf,
                    seed=mix_scalar(seed, r, 2))
        trees.append(tree)
        F += learning_rate * tree.predict(X)
    return FittedBoosting(init, float(learning_rate), tuple(trees))


def select_boosting_rounds(X, y, weights=None, grid=DEFAULTS.boosting_round_grid,
                           k_folds=DEFAULTS.cv_folds, seed=0, **params) -> int:
    """Pick the round count in ``grid`` with the lowest k-fold validation MSE."""
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n)
    w = np.ones(n) if weights is None else as_vector(weights, n, "weights")
    fold_of = keyed_folds(row_keys(X, y), k_folds, seed)
    loss = {r: 0.0 for r in grid}
    for k in range(k_folds):
        tr, va = fold_of != k, fold_of == k
        fit = fit_gradient_boosting(X[tr], y[tr], w[tr], n_rounds=max(grid), seed=seed, **params)
        for r, pred in fit.staged_predict(X[va], grid).items():
            loss[r] += float(w[va] @ (y[va] - pred) ** 2)
    return min(grid, key=lambda r: (loss[r], r))


@dataclass(frozen=True)
class GradientBoosting:
    """Boosting regressor; ``n_rounds=None`` selects rounds by k-fold CV."""

    n_rounds: int | None = None
    learning_rate: float = DEFAULTS.boosting_learning_rate
    max_depth: int = DEFAULTS.boosting_depth
    min_leaf: int = DEFAULTS.boosting_min_leaf
    subsample: float = DEFAULTS.boosting_subsample
    round_grid: tuple[int, ...] = DEFAULTS.boosting_round_grid
    seed: int = 0

    def fit(self, X, y, weights=None) -> FittedBoosting:
        params = dict(learning_rate=self.learning_rate, max_depth=self.max_depth,
                      min_leaf=self.min_leaf, subsample=self.subsample)
        rounds = self.n_rounds
        if rounds is None:
            X = as_matrix(X)
            if X.shape[0] >= 6 * DEFAULTS.cv_folds:
                rounds = select_boosting_rounds(X, y, weights, self.round_grid, seed=self.seed,
                                                **params)
            else:
                rounds = min(self.round_grid)
        return fit_gradient_boosting(X, y, weights, n_rounds=rounds, seed=self.seed, **params)
