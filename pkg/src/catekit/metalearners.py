"""Meta-learners for the conditional average treatment effect.

Every estimator returns a :class:`CateModel`, an immutable object with a
``label`` and ``predict_cate(X)``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS, NUMERIC
from .data import FoldAssignment, TrialDataset, make_folds
from .learners import RandomForest, StackedRegressor, default_stack_bases
from .numerics import LogisticFit, as_matrix, fit_logistic


class CateModel(ABC):
    label: str = "cate"

    @abstractmethod
    def predict_cate(self, X) -> np.ndarray:
        """Estimated treatment effect for each row of ``X``."""


# ---------------------------------------------------------------- propensity


@dataclass(frozen=True)
class PropensityModel:
    fit: LogisticFit

    @property
    def degenerate(self) -> bool:
        return self.fit.degenerate

    def predict(self, X) -> np.ndarray:
        return self.fit.predict_probability(X)


@dataclass(frozen=True)
class ConstantPropensity:
    value: float

    def predict(self, X) -> np.ndarray:
        return np.full(as_matrix(X).shape[0], float(self.value))


def fit_propensity(dataset: TrialDataset) -> PropensityModel:
    """Logistic propensity model with predictions clipped to [0.01, 0.99]."""
    dataset.require_both_arms()
    return PropensityModel(fit_logistic(dataset.covariates, dataset.treatment))


def _propensity(propensity, dataset: TrialDataset):
    if propensity is None:
        return fit_propensity(dataset)
    if isinstance(propensity, (int, float)):
        return ConstantPropensity(float(propensity))
    return propensity


# ------------------------------------------------------------------ nuisances


@dataclass(frozen=True)
class NuisanceSet:
    """Cross-fitted nuisance estimates (out-of-fold vectors) with fold provenance."""

    folds: FoldAssignment
    oof_m: np.ndarray
    oof_pi: np.ndarray
    oof_mu0: np.ndarray | None = None
    oof_mu1: np.ndarray | None = None
    m: object | None = None
    pi: object | None = None
    mu0: object | None = None
    mu1: object | None = None


def crossfit_nuisances(dataset: TrialDataset, outcome_learner=None,
                       k_folds: int = DEFAULTS.cv_folds, seed: int = 0,
                       arms: bool = True, refit: bool = False) -> NuisanceSet:
    """Out-of-fold ``m(x)=E[Y|X]``, ``pi(x)`` and (optionally) ``mu_0, mu_1``.

    ``outcome_learner`` defaults to a random forest; the propensity is
    always logistic.  ``refit`` also fits every nuisance on all rows.
    """
    dataset.require_both_arms()
    learner = outcome_learner if outcome_learner is not None else RandomForest(seed=seed)
    X, A, Y = dataset.covariates, dataset.treatment, dataset.outcome
    folds = make_folds(dataset, k_folds, seed)
    n = dataset.n
    oof_m, oof_pi = np.zeros(n), np.zeros(n)
    oof_mu0 = np.zeros(n) if arms else None
    oof_mu1 = np.zeros(n) if arms else None
    for tr, va in folds:
        sub = dataset.subset(tr)
        oof_m[va] = learner.fit(sub.covariates, sub.outcome).predict(X[va])
        oof_pi[va] = fit_propensity(sub).predict(X[va])
        if arms:
            c, t = tr[A[tr] == 0], tr[A[tr] == 1]
            oof_mu0[va] = learner.fit(X[c], Y[c]).predict(X[va])
            oof_mu1[va] = learner.fit(X[t], Y[t]).predict(X[va])
    full = {}
    if refit:
        full["m"] = learner.fit(X, Y)
        full["pi"] = fit_propensity(dataset)
        if arms:
            full["mu0"] = learner.fit(X[A == 0], Y[A == 0])
            full["mu1"] = learner.fit(X[A == 1], Y[A == 1])
    return NuisanceSet(folds, oof_m, oof_pi, oof_mu0, oof_mu1, **full)


# ------------------------------------------------------------------ S learner


@dataclass(frozen=True)
class SLearnerModel(CateModel):
    model: object
    label: str = "S"

    def predict_cate(self, X) -> np.ndarray:
        X = as_matrix(X)
        ones = np.ones((X.shape[0], 1))
        return self.model.predict(np.hstack([X, ones])) - self.model.predict(np.hstack([X, 0 * ones]))


def fit_s_learner(dataset: TrialDataset, base, label: str = "S") -> SLearnerModel:
    """One regression of ``Y`` on ``[X | A]``; effect = prediction at A=1 minus A=0."""
    dataset.require_both_arms()
    XA = np.hstack([dataset.covariates, dataset.treatment[:, None]])
    return SLearnerModel(base.fit(XA, dataset.outcome), label)


# ------------------------------------------------------------------ T learner


@dataclass(frozen=True)
class TLearnerModel(CateModel):
    mu0: object
    mu1: object
    label: str = "T"

    def predict_cate(self, X) -> np.ndarray:
        X = as_matrix(X)
        return self.mu1.predict(X) - self.mu0.predict(X)


T_LEARNER_MIN_ARM = 10


def _fit_arms(dataset: TrialDataset, base0, base1):
    n0, n1 = dataset.arm_sizes()
    if min(n0, n1) < T_LEARNER_MIN_ARM:
        raise ValueError(f"arm too small for a T-learner (control={n0}, treated={n1})")
    X, A, Y = dataset.covariates, dataset.treatment, dataset.outcome
    return base0.fit(X[A == 0], Y[A == 0]), base1.fit(X[A == 1], Y[A == 1])


def fit_t_learner(dataset: TrialDataset, base0, base1=None, label: str = "T") -> TLearnerModel:
    mu0, mu1 = _fit_arms(dataset, base0, base1 if base1 is not None else base0)
    return TLearnerModel(mu0, mu1, label)


# ------------------------------------------------------------------ X learner


def x_pseudo_outcomes(dataset: TrialDataset, mu0, mu1) -> tuple[np.ndarray, np.ndarray]:
    """Imputed effects: ``mu1(X) - Y`` on controls and ``Y - mu0(X)`` on treated."""
    X, A, Y = dataset.covariates, dataset.treatment, dataset.outcome
    c, t = A == 0, A == 1
    return mu1.predict(X[c]) - Y[c], Y[t] - mu0.predict(X[t])


@dataclass(frozen=True)
class XLearnerModel(CateModel):
    mu0: object
    mu1: object
    tau0: object
    tau1: object
    propensity: object
    label: str = "X"

    def predict_cate(self, X) -> np.ndarray:
        X = as_matrix(X)
        pi = self.propensity.predict(X)
        return pi * self.tau0.predict(X) + (1.0 - pi) * self.tau1.predict(X)


def fit_x_learner(dataset: TrialDataset, base_outcome, base_effect=None, propensity=None,
                  label: str = "X") -> XLearnerModel:
    """Two-stage X-learner combined as ``pi*tau0 + (1 - pi)*tau1``.

    ``propensity`` may be ``None`` (fit logistic), a constant, or any object
    with ``predict(X)``.
    """
    base_effect = base_effect if base_effect is not None else base_outcome
    mu0, mu1 = _fit_arms(dataset, base_outcome, base_outcome)
    d0, d1 = x_pseudo_outcomes(dataset, mu0, mu1)
    X, A = dataset.covariates, dataset.treatment
    tau0 = base_effect.fit(X[A == 0], d0)
    tau1 = base_effect.fit(X[A == 1], d1)
    return XLearnerModel(mu0, mu1, tau0, tau1, _propensity(propensity, dataset), label)


def fit_stacked_x_learner(dataset: TrialDataset, base_set=None, seed: int = 0,
                          k_folds: int = DEFAULTS.stack_folds,
                          label: str = "Stacked-X") -> XLearnerModel:
    """X-learner whose outcome and effect stages are stacked regressors.

    The default base set is elastic net, random forest, boosting and AGLM.
    """
    if base_set is None:
        base_set = default_stack_bases(seed)
    base_set = tuple(base_set)
    if not base_set:
        raise ValueError("base_set must be non-empty")
    stack = StackedRegressor(base_set, k_folds=k_folds, seed=seed)
    return fit_x_learner(dataset, stack, stack, None, label)


# ----------------------------------------------------------------- DR learner


def dr_pseudo_outcome(y, a, pi, mu0, mu1) -> np.ndarray:
    """``(A - pi)/(pi(1 - pi)) * (Y - mu_A) + mu1 - mu0``."""
    y, a, pi, mu0, mu1 = (np.asarray(v, dtype=np.float64) for v in (y, a, pi, mu0, mu1))
    mu_a = np.where(a == 1, mu1, mu0)
    return (a - pi) / (pi * (1.0 - pi)) * (y - mu_a) + mu1 - mu0


@dataclass(frozen=True)
class FinalStageModel(CateModel):
    model: object
    label: str = "DR"

    def predict_cate(self, X) -> np.ndarray:
        return self.model.predict(as_matrix(X))


def _dr_fold(train: TrialDataset, target: TrialDataset, base_outcome, propensity):
    mu0, mu1 = _fit_arms(train, base_outcome, base_outcome)
    prop = _propensity(propensity, train)
    if getattr(prop, "degenerate", False):
        raise ValueError("degenerate propensity model")
    Xt = target.covariates
    return dr_pseudo_outcome(target.outcome, target.treatment, prop.predict(Xt),
                             mu0.predict(Xt), mu1.predict(Xt))


def fit_dr_learner(dataset: TrialDataset, base_outcome, base_final, mode: str = "crossfit",
                   seed: int = 0, propensity=None, label: str = "DR") -> FinalStageModel:
    """Doubly-robust learner.

    ``mode="split"`` fits nuisances on one half and regresses the pseudo
    outcome on the other; ``mode="crossfit"`` swaps the halves so every unit
    gets an out-of-fold pseudo outcome and the final regression uses all rows.
    """
    dataset.require_both_arms()
    if dataset.n < 40:
        raise ValueError("DR learner needs n >= 40")
    folds = make_folds(dataset, 2, seed)
    X = dataset.covariates
    if mode == "split":
        s1, s2 = folds.train_test(1)
        phi = _dr_fold(dataset.subset(s1), dataset.subset(s2), base_outcome, propensity)
        return FinalStageModel(base_final.fit(X[s2], phi), label)
    if mode != "crossfit":
        raise ValueError(f"unknown DR mode {mode!r}")
    phi = np.zeros(dataset.n)
    for tr, va in folds:
        phi[va] = _dr_fold(dataset.subset(tr), dataset.subset(va), base_outcome, propensity)
    return FinalStageModel(base_final.fit(X, phi), label)


# ------------------------------------------------------------------ R learner


def r_transform(y, a, m_hat, pi_hat) -> tuple[np.ndarray, np.ndarray]:
    """Weighted-regression form of the R-objective: ``(target, weights)``.

    Units with ``|A - pi| < 1e-6`` get weight 0 (and target 0).
    """
    resid_a = np.asarray(a, dtype=np.float64) - np.asarray(pi_hat, dtype=np.float64)
    resid_y = np.asarray(y, dtype=np.float64) - np.asarray(m_hat, dtype=np.float64)
    ok = np.abs(resid_a) >= NUMERIC.r_learner_min_abs_residual
    target = np.divide(resid_y, resid_a, out=np.zeros_like(resid_y), where=ok)
    return target, np.where(ok, resid_a * resid_a, 0.0)


def fit_r_learner(dataset: TrialDataset, base_effect, nuisances: NuisanceSet | None = None,
                  outcome_learner=None, seed: int = 0, label: str = "R") -> FinalStageModel:
    """R-learner: weighted regression of ``(Y - m)/(A - pi)`` on ``X``."""
    if nuisances is None:
        nuisances = crossfit_nuisances(dataset, outcome_learner, seed=seed, arms=False)
    target, w = r_transform(dataset.outcome, dataset.treatment, nuisances.oof_m,
                            nuisances.oof_pi)
    return FinalStageModel(base_effect.fit(dataset.covariates, target, w), label)


def r_loss(dataset: TrialDataset, nuisances: NuisanceSet, tau_hat) -> float:
    """Mean of ``[(Y - m) - (A - pi) * tau]^2`` with out-of-fold nuisances."""
    tau_hat = np.asarray(tau_hat, dtype=np.float64)
    if tau_hat.shape != (dataset.n,):
        raise ValueError("tau_hat length must equal n")
    resid = (dataset.outcome - nuisances.oof_m) - (dataset.treatment - nuisances.oof_pi) * tau_hat
    return float(np.mean(resid * resid))
