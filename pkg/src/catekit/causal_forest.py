"""Causal forest on cross-fitted residuals, with optional honest leaf estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import DEFAULTS, NUMERIC
from .data import TrialDataset
from .learners import RandomForest, TreeArrays, grow
from .learners.base import mix_scalar, resample, row_keys, split_by_key
from .metalearners import CateModel, NuisanceSet, crossfit_nuisances
from .numerics import as_matrix


def honest_values(tree: TreeArrays, X_est, y_res, t_res, arm, min_leaf: int) -> np.ndarray:
    """Re-estimate node effects from held-out rows.

    A node keeps ``sum(t*y)/sum(t*t)`` over the estimation rows routed
    through it when it has at least ``min_leaf`` rows per arm and enough
    treatment variation; otherwise it inherits its parent's value.  The root
    falls back to the value it had from the growing sample.
    """
    n_nodes = tree.n_nodes
    parent = tree.parents()
    leaf = tree.apply(X_est)
    s_ty = np.bincount(leaf, t_res * y_res, n_nodes)
    s_tt = np.bincount(leaf, t_res * t_res, n_nodes)
    n1 = np.bincount(leaf, arm.astype(np.float64), n_nodes)
    n0 = np.bincount(leaf, minlength=n_nodes) - n1
    # node ids grow away from the root, so a reverse sweep accumulates subtrees
    for node in range(n_nodes - 1, 0, -1):
        p = parent[node]
        s_ty[p] += s_ty[node]
        s_tt[p] += s_tt[node]
        n1[p] += n1[node]
        n0[p] += n0[node]
    ok = (s_tt >= NUMERIC.leaf_min_treatment_ss) & (n0 >= min_leaf) & (n1 >= min_leaf)
    own = np.divide(s_ty, s_tt, out=np.zeros(n_nodes), where=s_tt > 0)
    values = np.empty(n_nodes)
    values[0] = own[0] if ok[0] else tree.value[0]
    for node in range(1, n_nodes):
        values[node] = own[node] if ok[node] else values[parent[node]]
    return values


@dataclass(frozen=True)
class CausalForestModel(CateModel):
    trees: tuple[TreeArrays, ...]
    leaf_values: tuple[np.ndarray, ...]
    nuisances: NuisanceSet
    honesty: bool
    label: str = "CF"

    def predict_cate(self, X) -> np.ndarray:
        X = as_matrix(X)
        out = np.zeros(X.shape[0])
        for tree, values in zip(self.trees, self.leaf_values):
            out += values[tree.apply(X)]
        return out / len(self.trees)


def fit_causal_forest(dataset: TrialDataset, honesty: bool = True,
                      n_trees: int = DEFAULTS.causal_forest_trees, mtry: int | None = None,
                      min_leaf: int = DEFAULTS.causal_forest_min_leaf,
                      subsample: float = DEFAULTS.causal_forest_subsample, seed: int = 0,
                      nuisances: NuisanceSet | None = None, outcome_learner=None,
                      label: str | None = None) -> CausalForestModel:
    """Forest of trees splitting to maximise effect heterogeneity.

    Outcome and treatment are first residualised with cross-fitted
    ``m(x)`` (random forest) and ``pi(x)`` (logistic).  Each tree uses a
    ``subsample`` fraction of rows drawn without replacement; with
    ``honesty`` half of them choose the splits and the other half supply
    the leaf estimates.  ``min_leaf`` applies to each treatment arm.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    dataset.require_both_arms(2 * min_leaf)
    if not 0 < subsample <= 1:
        raise ValueError("subsample must lie in (0, 1]")
    X, A, Y = dataset.covariates, dataset.treatment, dataset.outcome
    p = dataset.p
    mtry = math.ceil(math.sqrt(p)) if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise ValueError("mtry must lie in [1, p]")
    if nuisances is None:
        learner = outcome_learner if outcome_learner is not None else RandomForest(seed=seed)
        nuisances = crossfit_nuisances(dataset, learner, seed=seed, arms=False)
    y_res = Y - nuisances.oof_m
    t_res = A - nuisances.oof_pi
    keys = row_keys(X, Y)

    trees, values = [], []
    for b in range(n_trees):
        rows, _ = resample(keys, seed, b, subsample, replace=False)
        if honesty:
            grow_part, est_part = split_by_key(keys[rows], seed, n_trees + b,
                                               DEFAULTS.honesty_fraction)
            grow_rows, est_rows = rows[grow_part], rows[est_part]
        else:
            grow_rows = est_rows = rows
        tree = grow(X[grow_rows], y_res[grow_rows], min_leaf=min_leaf, mtry=mtry,
                    seed=mix_scalar(seed, b, 3), criterion=kernels.CRIT_CAUSAL,
                    treat_resid=t_res[grow_rows], arm=A[grow_rows])
        trees.append(tree)
        if honesty:
            values.append(honest_values(tree, X[est_rows], y_res[est_rows], t_res[est_rows],
                                        A[est_rows], min_leaf))
        else:
            values.append(tree.value)
    if label is None:
        label = "H-CF" if honesty else "CF"
    return CausalForestModel(tuple(trees), tuple(values), nuisances, honesty, label)
