"""Supervised base learners sharing one ``fit(X, y, weights) -> predict`` contract."""
from .aglm import Aglm, AglmEncoding, FittedAglm, fit_aglm
from .base import FittedRegressor, Regressor, row_keys
from .linear import ElasticNet, ElasticNetCV, LinearRegression
from .stacking import FittedStack, StackedRegressor, fit_stacked_regressor, with_seed
from .trees import (
    FittedBoosting,
    FittedForest,
    FittedTree,
    GradientBoosting,
    RandomForest,
    RegressionTree,
    TreeArrays,
    fit_gradient_boosting,
    fit_random_forest,
    fit_regression_tree,
    grow,
)


def default_stack_bases(seed: int = 0) -> tuple:
    """Elastic net, random forest, boosting and AGLM, the default stacking set."""
    return (
        ElasticNetCV(seed=seed),
        RandomForest(seed=seed),
        GradientBoosting(seed=seed),
        Aglm(seed=seed),
    )


__all__ = [
    "Aglm", "AglmEncoding", "ElasticNet", "ElasticNetCV", "FittedAglm", "FittedBoosting",
    "FittedForest", "FittedRegressor", "FittedStack", "FittedTree", "GradientBoosting",
    "LinearRegression", "RandomForest", "RegressionTree", "Regressor", "StackedRegressor",
    "TreeArrays", "default_stack_bases", "fit_aglm", "fit_gradient_boosting",
    "fit_random_forest", "fit_regression_tree", "fit_stacked_regressor", "grow", "row_keys",
    "with_seed",
]
