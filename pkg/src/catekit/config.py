"""Numerical constants and learner defaults, collected in one place."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class NumericConstants:
    ols_ridge_jitter: float = 1e-10
    logistic_ridge: float = 1e-6
    logistic_max_iter: int = 100
    propensity_clip: tuple[float, float] = (0.01, 0.99)
    enet_tol: float = 1e-7
    enet_max_sweeps: int = 10_000
    simplex_tol: float = 1e-8
    nnls_kkt_tol: float = 1e-8
    kendall_variant: str = "b"
    leaf_min_treatment_ss: float = 1e-8
    r_learner_min_abs_residual: float = 1e-6


@dataclass(frozen=True)
class LearnerDefaults:
    forest_trees: int = 500
    forest_min_leaf: int = 5
    boosting_rounds: int = 200
    boosting_round_grid: tuple[int, ...] = (50, 100, 200)
    boosting_learning_rate: float = 0.1
    boosting_depth: int = 3
    boosting_min_leaf: int = 5
    boosting_subsample: float = 0.8
    aglm_bins: int = 20
    lambda_grid_size: int = 20
    lambda_min_ratio: float = 1e-3
    lambda_min_ratio_wide: float = 1e-2
    enet_l1_ratio: float = 0.5
    cv_folds: int = 3
    stack_folds: int = 3
    stack_nonnegative: bool = False
    causal_forest_trees: int = 500
    causal_forest_min_leaf: int = 5
    causal_forest_subsample: float = 0.5
    honesty_fraction: float = 0.5


@dataclass(frozen=True)
class Settings:
    numeric: NumericConstants = field(default_factory=NumericConstants)
    learners: LearnerDefaults = field(default_factory=LearnerDefaults)


SETTINGS = Settings()
NUMERIC = SETTINGS.numeric
DEFAULTS = SETTINGS.learners
