"""Conditional average treatment effect estimation for randomised trials.

Meta-learners, causal forests and CATE ensembles built on a small numeric
core, plus simulation generators, evaluation metrics and a benchmark runner.
"""
from .causal_forest import CausalForestModel, fit_causal_forest
from .data import EvaluationSet, FoldAssignment, TrialDataset, make_folds, read_csv, write_csv
from .dgp import Pdl1Params, ScenarioSpec, gen_linear_family, gen_pdl1, load_external, load_preset
from .ensembles import (
    cba_combine,
    crossfit_member_predictions,
    fit_causal_stacking,
    fit_r_stacking,
    fit_t_stacking,
)
from .kernels import BACKEND
from .metalearners import (
    CateModel,
    NuisanceSet,
    crossfit_nuisances,
    fit_dr_learner,
    fit_propensity,
    fit_r_learner,
    fit_s_learner,
    fit_stacked_x_learner,
    fit_t_learner,
    fit_x_learner,
    r_loss,
)
from .metrics import enumerate_subgroups, evaluate, rod, srmse

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CateModel", "CausalForestModel", "EvaluationSet", "FoldAssignment",
    "NuisanceSet", "Pdl1Params", "ScenarioSpec", "TrialDataset", "cba_combine",
    "crossfit_member_predictions", "crossfit_nuisances", "enumerate_subgroups", "evaluate",
    "fit_causal_forest", "fit_causal_stacking", "fit_dr_learner", "fit_propensity",
    "fit_r_learner", "fit_r_stacking", "fit_s_learner", "fit_stacked_x_learner",
    "fit_t_learner", "fit_t_stacking", "fit_x_learner", "gen_linear_family", "gen_pdl1",
    "load_external", "load_preset", "make_folds", "read_csv", "rod", "srmse", "write_csv",
]
