"""Named CATE models used by the benchmark, with a per-replicate fit cache.

Ensembles reuse the member fits and nuisance estimates already computed
for the same training set instead of refitting them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .causal_forest import fit_causal_forest
from .data import EvaluationSet, TrialDataset
from .ensembles import (
    cba_combine,
    crossfit_member_predictions,
    fit_causal_stacking,
    fit_r_stacking,
    fit_t_stacking,
)
from .learners import Aglm, ElasticNetCV, GradientBoosting, LinearRegression, RandomForest
from .learners.base import row_keys
from .metalearners import (
    CateModel,
    NuisanceSet,
    crossfit_nuisances,
    fit_dr_learner,
    fit_r_learner,
    fit_s_learner,
    fit_stacked_x_learner,
    fit_t_learner,
    fit_x_learner,
)
from .numerics import as_matrix

BASE_ZOO = ("X-RF", "X-Boosting", "X-AGLM", "T-EN", "H-CF", "CF")
SINGLE_MODELS = ("CF", "H-CF", "S-Boost", "T-Linear", "T-EN", "X-AGLM", "X-Boosting", "X-RF",
                 "DR-RF", "R-RF", "Stacked-X")
ENSEMBLE_MODELS = ("CBA", "R-Stacking", "T-Stacking", "Causal-Stacking")
ORACLE = "Oracle"
MODEL_LABELS = SINGLE_MODELS + ENSEMBLE_MODELS + (ORACLE,)


@dataclass(frozen=True)
class LookupOracle(CateModel):
    """Test hook: returns the known true effect for rows it has seen."""

    keys: dict
    label: str = ORACLE

    @classmethod
    def from_evaluation(cls, evaluation: EvaluationSet) -> LookupOracle:
        keys = row_keys(evaluation.covariates)
        return cls(dict(zip(keys.tolist(), evaluation.true_cate.tolist())))

    def predict_cate(self, X) -> np.ndarray:
        try:
            return np.array([self.keys[k] for k in row_keys(as_matrix(X)).tolist()])
        except KeyError:
            raise ValueError("oracle queried on rows without a known effect") from None


def _single(label: str, ds: TrialDataset, seed: int, nuisances: Callable[[], NuisanceSet]):
    rf, boost = RandomForest(seed=seed), GradientBoosting(seed=seed)
    if label == "X-RF":
        return fit_x_learner(ds, rf, label=label)
    if label == "X-Boosting":
        return fit_x_learner(ds, boost, label=label)
    if label == "X-AGLM":
        return fit_x_learner(ds, Aglm(seed=seed), label=label)
    if label == "T-EN":
        return fit_t_learner(ds, ElasticNetCV(seed=seed), label=label)
    if label == "T-Linear":
        return fit_t_learner(ds, LinearRegression(), label=label)
    if label == "S-Boost":
        return fit_s_learner(ds, boost, label=label)
    if label == "DR-RF":
        return fit_dr_learner(ds, rf, rf, seed=seed, label=label)
    if label == "R-RF":
        return fit_r_learner(ds, rf, nuisances=nuisances(), label=label)
    if label in ("CF", "H-CF"):
        return fit_causal_forest(ds, honesty=label == "H-CF", seed=seed, nuisances=nuisances(),
                                 label=label)
    if label == "Stacked-X":
        return fit_stacked_x_learner(ds, seed=seed, label=label)
    raise KeyError(label)


def fit_model(label: str, dataset: TrialDataset, seed: int = 0) -> CateModel:
    """Fit one non-ensemble model by label."""
    if label not in SINGLE_MODELS:
        raise KeyError(f"unknown single model {label!r}")
    return _single(label, dataset, seed, lambda: crossfit_nuisances(
        dataset, RandomForest(seed=seed), seed=seed, arms=False))


@dataclass
class ReplicateZoo:
    """Fits models by label for one training set, sharing intermediate work."""

    dataset: TrialDataset
    seed: int
    evaluation: EvaluationSet | None = None
    members: tuple[str, ...] = BASE_ZOO
    cba_out_of_fold: bool = False
    _models: dict = field(default_factory=dict, repr=False)
    _nuisances: NuisanceSet | None = field(default=None, repr=False)
    _crossfit: object = field(default=None, repr=False)

    def nuisances(self, arms: bool = False) -> NuisanceSet:
        ns = self._nuisances
        if ns is None or (arms and ns.oof_mu0 is None):
            ns = crossfit_nuisances(self.dataset, RandomForest(seed=self.seed), seed=self.seed,
                                    arms=arms)
            self._nuisances = ns
        return ns

    def _member_crossfit(self):
        if self._crossfit is None:
            factories = [lambda ds, lab=lab: fit_model(lab, ds, self.seed) for lab in self.members]
            self._crossfit = crossfit_member_predictions(self.dataset, factories, seed=self.seed,
                                                         labels=self.members, refit=False)
        return self._crossfit

    def model(self, label: str) -> CateModel:
        if label not in self._models:
            self._models[label] = self._fit(label)
        return self._models[label]

    def _fit(self, label: str) -> CateModel:
        if label == ORACLE:
            if self.evaluation is None:
                raise ValueError("the oracle needs an evaluation set")
            return LookupOracle.from_evaluation(self.evaluation)
        if label in SINGLE_MODELS:
            return _single(label, self.dataset, self.seed, self.nuisances)
        X = self.dataset.covariates
        if label == "CBA":
            if self.cba_out_of_fold:
                cross = self._member_crossfit()
                fitted = [self.model(m) for m in cross.labels]
                fit, _ = cba_combine(cross.oof, cross.labels, fitted, label=label)
            else:
                fitted = [self.model(m) for m in self.members]
                P = np.column_stack([m.predict_cate(X) for m in fitted])
                fit, _ = cba_combine(P, self.members, fitted, label=label)
            return fit.combined
        if label not in ENSEMBLE_MODELS:
            raise KeyError(f"unknown model {label!r}")
        cross = self._member_crossfit()
        fitted = [self.model(m) for m in cross.labels]
        ns = self.nuisances(arms=True)
        if label == "R-Stacking":
            fit = fit_r_stacking(self.dataset, cross.oof, ns, fitted, cross.labels, label)
        elif label == "T-Stacking":
            fit = fit_t_stacking(self.dataset, cross.oof, ns, fitted, cross.labels, label)
        else:
            fit = fit_causal_stacking(self.dataset, cross.oof, ns.oof_mu0, ns.oof_mu1, 0.5,
                                      fitted, cross.labels, label)
        return fit.combined
