"""Ensembles of CATE models: three stacking variants and consensus-based averaging."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULTS
from .data import TrialDataset, make_folds
from .metalearners import CateModel, NuisanceSet
from .numerics import ZeroVarianceRanking, as_matrix, fit_nnls, fit_ols, fit_simplex_ls, kendall_tau

log = logging.getLogger(__name__)

MemberFactory = Callable[[TrialDataset], CateModel]


@dataclass(frozen=True)
class MemberPredictions:
    """Out-of-fold member predictions (``n x K``) plus full-data refits."""

    oof: np.ndarray
    labels: tuple[str, ...]
    fitted: tuple[CateModel, ...] | None
    dropped: tuple[str, ...] = ()

    def full_data(self, X) -> np.ndarray:
        if self.fitted is None:
            raise ValueError("members were not refit on the full data")
        return np.column_stack([m.predict_cate(X) for m in self.fitted])


def _label(factory, i: int) -> str:
    return getattr(factory, "label", None) or getattr(factory, "__name__", None) or f"member{i}"


def crossfit_member_predictions(dataset: TrialDataset, members: Sequence[MemberFactory],
                                k_folds: int = DEFAULTS.cv_folds, seed: int = 0,
                                labels: Sequence[str] | None = None,
                                refit: bool = True) -> MemberPredictions:
    """Cross-fit every member factory: column ``k`` holds member ``k``'s
    predictions for units it never saw during fitting.

    A member whose fit fails on any fold is dropped with a warning.
    """
    members = list(members)
    if len(members) < 2:
        raise ValueError("need at least two members")
    if dataset.n < 2 * k_folds:
        raise ValueError(f"n={dataset.n} too small for {k_folds}-fold cross-fitting")
    labels = list(labels) if labels is not None else [_label(f, i) for i, f in enumerate(members)]
    if len(labels) != len(members):
        raise ValueError("labels and members differ in length")
    folds = make_folds(dataset, k_folds, seed)
    X = dataset.covariates
    cols, kept, fitted, dropped = [], [], [], []
    for label, factory in zip(labels, members):
        col = np.zeros(dataset.n)
        try:
            for tr, va in folds:
                col[va] = factory(dataset.subset(tr)).predict_cate(X[va])
            if not np.all(np.isfinite(col)):
                raise FloatingPointError("non-finite predictions")
            full = factory(dataset) if refit else None
        except Exception as exc:  # noqa: BLE001 - a failing member is dropped, not fatal
            log.warning("dropping ensemble member %s: %s", label, exc)
            dropped.append(label)
            continue
        cols.append(col)
        kept.append(label)
        fitted.append(full)
    if len(kept) < 2:
        raise RuntimeError("fewer than two ensemble members survived cross-fitting")
    return MemberPredictions(np.column_stack(cols), tuple(kept),
                             tuple(fitted) if refit else None, tuple(dropped))


# ------------------------------------------------------------------ combined


@dataclass(frozen=True)
class LinearEnsembleModel(CateModel):
    """``offset + sum_k weights[k] * member_k(x)``."""

    members: tuple[CateModel, ...]
    weights: np.ndarray
    offset: float = 0.0
    label: str = "ensemble"

    def predict_cate(self, X) -> np.ndarray:
        X = as_matrix(X)
        out = np.full(X.shape[0], self.offset)
        for w, member in zip(self.weights, self.members):
            if w != 0.0:
                out += w * member.predict_cate(X)
        return out


@dataclass(frozen=True)
class EnsembleFit:
    member_labels: tuple[str, ...]
    weights: np.ndarray
    combined: CateModel | None
    training_prediction: np.ndarray
    b: float = 0.0
    c: float = 0.0
    selected: tuple[str, ...] = ()
    objective: float = float("nan")


def _combined(members, weights, offset, label):
    if members is None:
        return None
    members = tuple(members)
    if len(members) != len(weights):
        raise ValueError("member count does not match the prediction matrix")
    return LinearEnsembleModel(members, np.asarray(weights, dtype=np.float64), float(offset), label)


def _matrix(member_matrix, n: int) -> np.ndarray:
    P = as_matrix(member_matrix, "member_matrix")
    if P.shape[0] != n:
        raise ValueError("member_matrix rows must equal n")
    return P


def _labels(labels, K: int) -> tuple[str, ...]:
    return tuple(labels) if labels is not None else tuple(f"member{k}" for k in range(K))


# ---------------------------------------------------------------- R-stacking


def r_stacking_objective(resid_y, resid_a, P, b, c, alpha) -> float:
    r = resid_y - b - (c + P @ alpha) * resid_a
    return float(np.mean(r * r))


def fit_r_stacking(dataset: TrialDataset, member_matrix, nuisances: NuisanceSet,
                   members=None, labels=None, label: str = "R-Stacking") -> EnsembleFit:
    """Minimise the R-loss over ``(b, c, alpha >= 0)``.

    The problem is least squares of ``Y - m`` on ``[1, A - pi, (A - pi) * tau_k]``
    with only the ``alpha`` block constrained.  Projecting the free columns
    out of both sides (Frisch-Waugh) leaves a plain NNLS problem for
    ``alpha``; ``b`` and ``c`` then follow by OLS on the remainder.  This is
    the exact joint optimum, no alternation needed.
    """
    P = _matrix(member_matrix, dataset.n)
    ry = dataset.outcome - nuisances.oof_m
    ra = dataset.treatment - nuisances.oof_pi
    Z = np.column_stack([np.ones(dataset.n), ra])
    C = P * ra[:, None]
    # projection onto the orthogonal complement of span(Z)
    proj, *_ = np.linalg.lstsq(Z, np.column_stack([ry, C]), rcond=None)
    resid = np.column_stack([ry, C]) - Z @ proj
    alpha = fit_nnls(resid[:, 1:], resid[:, 0]).coefficients
    (b, c), *_ = np.linalg.lstsq(Z, ry - C @ alpha, rcond=None)
    b, c = float(b), float(c)
    obj = r_stacking_objective(ry, ra, P, b, c, alpha)
    return EnsembleFit(_labels(labels, P.shape[1]), alpha, _combined(members, alpha, c, label),
                       c + P @ alpha, b=b, c=c, objective=obj)


# ----------------------------------------------------------- causal stacking


def causal_stacking_pseudo_outcome(y, a, mu0, mu1, propensity) -> np.ndarray:
    """``(mu1 - mu0) + (Y - mu1) A / pi - (Y - mu0)(1 - A)/(1 - pi)``."""
    y, a, mu0, mu1 = (np.asarray(v, dtype=np.float64) for v in (y, a, mu0, mu1))
    pi = np.broadcast_to(np.asarray(propensity, dtype=np.float64), y.shape)
    if np.any((pi <= 0) | (pi >= 1)):
        raise ValueError("known propensity must lie in (0, 1)")
    return (mu1 - mu0) + (y - mu1) * a / pi - (y - mu0) * (1 - a) / (1 - pi)


def fit_causal_stacking(dataset: TrialDataset, member_matrix, mu0_hat, mu1_hat,
                        known_propensity=0.5, members=None, labels=None,
                        label: str = "Causal-Stacking") -> EnsembleFit:
    """Simplex-constrained least squares of the IPW-corrected pseudo outcome."""
    P = _matrix(member_matrix, dataset.n)
    target = causal_stacking_pseudo_outcome(dataset.outcome, dataset.treatment, mu0_hat,
                                            mu1_hat, known_propensity)
    alpha = fit_simplex_ls(P, target).coefficients
    fitted = P @ alpha
    return EnsembleFit(_labels(labels, P.shape[1]), alpha, _combined(members, alpha, 0.0, label),
                       fitted, objective=float(np.mean((target - fitted) ** 2)))


# ---------------------------------------------------------------- T-stacking


def fit_t_stacking(dataset: TrialDataset, member_matrix, t_target, members=None, labels=None,
                   label: str = "T-Stacking") -> EnsembleFit:
    """Non-negative least squares of a held-out T-learner's effect on the members.

    ``t_target`` is either the vector of out-of-fold T-learner effects or a
    :class:`NuisanceSet` (then ``oof_mu1 - oof_mu0`` is used).
    """
    P = _matrix(member_matrix, dataset.n)
    if isinstance(t_target, NuisanceSet):
        if t_target.oof_mu0 is None:
            raise ValueError("nuisance set lacks arm-specific outcome models")
        t_target = t_target.oof_mu1 - t_target.oof_mu0
    target = np.asarray(t_target, dtype=np.float64)
    if target.shape != (dataset.n,):
        raise ValueError("t_target length must equal n")
    alpha = fit_nnls(P, target).coefficients
    fitted = P @ alpha
    return EnsembleFit(_labels(labels, P.shape[1]), alpha, _combined(members, alpha, 0.0, label),
                       fitted, objective=float(np.mean((target - fitted) ** 2)))


# ----------------------------------------------------------------------- CBA


@dataclass(frozen=True)
class ConsensusDiagnostics:
    labels: tuple[str, ...]
    tau_matrix: np.ndarray
    mean_corr: np.ndarray
    sorted_order: np.ndarray
    knee_index: int
    dropped: tuple[str, ...] = ()
    fallback: bool = False
    selected: tuple[str, ...] = field(default=())

    def to_csv(self, path) -> None:
        """One row per retained member: mean agreement, rank, selection flag, tau row."""
        rank = np.empty(len(self.labels), dtype=np.int64)
        rank[self.sorted_order] = np.arange(1, len(self.labels) + 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "mean_corr", "rank", "selected", *self.labels])
            for i, lab in enumerate(self.labels):
                w.writerow([lab, repr(float(self.mean_corr[i])), int(rank[i]),
                            int(lab in self.selected), *(repr(float(v)) for v in self.tau_matrix[i])])
            for lab in self.dropped:
                w.writerow([lab, "", "", 0, *([""] * len(self.labels))])


def knee_index(sorted_desc) -> int:
    """Number of leading entries kept: position of the largest drop.

    Ties go to the earliest gap; with two or fewer entries everything is kept.
    """
    s = np.asarray(sorted_desc, dtype=np.float64)
    if s.size <= 2:
        return int(s.size)
    return int(np.argmin(np.diff(s))) + 1


def cba_combine(prediction_matrix, labels=None, members=None,
                label: str = "CBA") -> tuple[EnsembleFit, ConsensusDiagnostics]:
    """Consensus-based averaging.

    Members are ranked by their mean Kendall agreement with the others; the
    ones above the largest drop in that sorted curve are averaged with equal
    weights.  Constant members are dropped first; if fewer than two remain,
    every original member is averaged.
    """
    P = as_matrix(prediction_matrix, "prediction_matrix")
    K = P.shape[1]
    if K < 2:
        raise ValueError("CBA needs at least two members")
    labels = _labels(labels, K)
    if len(labels) != K:
        raise ValueError("labels must match the number of columns")

    constant = np.all(P == P[:1], axis=0)
    keep = np.flatnonzero(~constant)
    dropped = tuple(labels[k] for k in np.flatnonzero(constant))
    weights = np.zeros(K)
    if keep.size < 2:
        weights[:] = 1.0 / K
        diag = ConsensusDiagnostics(tuple(labels[k] for k in keep), np.eye(keep.size),
                                    np.zeros(keep.size), np.arange(keep.size), keep.size,
                                    dropped, fallback=True, selected=labels)
        fit = EnsembleFit(labels, weights, _combined(members, weights, 0.0, label), P @ weights,
                          selected=labels)
        return fit, diag

    k = keep.size
    T = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            try:
                T[i, j] = T[j, i] = kendall_tau(P[:, keep[i]], P[:, keep[j]])
            except ZeroVarianceRanking:  # pragma: no cover - constants already removed
                T[i, j] = T[j, i] = 0.0
    mean_corr = (T.sum(axis=1) - 1.0) / (k - 1)
    order = np.argsort(-mean_corr, kind="stable")
    m = knee_index(mean_corr[order])
    chosen = keep[np.sort(order[:m])]
    weights[chosen] = 1.0 / m
    selected = tuple(labels[c] for c in chosen)
    diag = ConsensusDiagnostics(tuple(labels[c] for c in keep), T, mean_corr, order, m, dropped,
                                selected=selected)
    fit = EnsembleFit(labels, weights, _combined(members, weights, 0.0, label), P @ weights,
                      selected=selected)
    return fit, diag
