"""AGLM: lasso on nested (cumulative) bin indicators of every feature."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import DEFAULTS
from ..numerics import EnetProblem, LinearFit, as_matrix, as_vector
from .linear import cv_penalty


@dataclass(frozen=True)
class AglmEncoding:
    """Per-feature strictly increasing cut points; bit ``j`` is ``x >= cut_j``."""

    cuts: tuple[np.ndarray, ...]

    @classmethod
    def from_data(cls, X, bins: int) -> AglmEncoding:
        if bins < 2:
            raise ValueError("bins_per_feature must be >= 2")
        X = as_matrix(X)
        qs = np.arange(1, bins) / bins
        cuts = []
        for j in range(X.shape[1]):
            col = X[:, j]
            c = np.unique(np.quantile(col, qs, method="linear"))
            # a cut at or below the minimum gives a constant indicator
            cuts.append(c[c > col.min()])
        return cls(tuple(cuts))

    @property
    def width(self) -> int:
        return int(sum(c.size for c in self.cuts))

    def encode(self, X) -> np.ndarray:
        X = as_matrix(X)
        blocks = [(X[:, [j]] >= c[None, :]).astype(np.float64)
                  for j, c in enumerate(self.cuts) if c.size]
        if not blocks:
            return np.zeros((X.shape[0], 0))
        return np.hstack(blocks)


@dataclass(frozen=True)
class FittedAglm:
    encoding: AglmEncoding
    linear: LinearFit

    def predict(self, X) -> np.ndarray:
        Z = self.encoding.encode(X)
        if Z.shape[1] == 0:
            return np.full(Z.shape[0], self.linear.intercept)
        return self.linear.predict(Z)


def fit_aglm(X, y, weights=None, bins_per_feature=DEFAULTS.aglm_bins, lambda1=None,
             seed=0, k_folds=DEFAULTS.cv_folds) -> FittedAglm:
    """Piecewise-constant additive fit; ``lambda1=None`` picks the penalty by CV."""
    X = as_matrix(X)
    n = X.shape[0]
    y = as_vector(y, n)
    enc = AglmEncoding.from_data(X, bins_per_feature)
    Z = enc.encode(X)
    if Z.shape[1] == 0:
        w = np.ones(n) if weights is None else as_vector(weights, n)
        return FittedAglm(enc, LinearFit(float(w @ y / w.sum()), np.zeros(0)))
    if lambda1 is None:
        _, prob, beta = cv_penalty(Z, y, weights, 1.0, k_folds, seed)
        return FittedAglm(enc, prob.to_fit(beta))
    prob = EnetProblem(Z, y, weights)
    beta, sweeps, ok = prob.solve(lambda1, 0.0)
    return FittedAglm(enc, prob.to_fit(beta, sweeps, ok))


@dataclass(frozen=True)
class Aglm:
    bins_per_feature: int = DEFAULTS.aglm_bins
    lambda1: float | None = None
    seed: int = 0

    def fit(self, X, y, weights=None) -> FittedAglm:
        return fit_aglm(X, y, weights, self.bins_per_feature, self.lambda1, self.seed)
