"""Accuracy and ranking metrics for CATE estimates, individually and over subgroups."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import EvaluationSet, TrialDataset, quantile
from .numerics import ZeroVarianceRanking, as_matrix, kendall_tau

log = logging.getLogger(__name__)

SUBGROUP_SHARE = math.sqrt(0.2)


class DegenerateMetric(ValueError):
    """The metric is undefined for these inputs (e.g. zero-variance truth)."""


def srmse(tau_hat, tau) -> float:
    """Root squared error scaled by the spread of the true effects."""
    tau_hat = np.asarray(tau_hat, dtype=np.float64).ravel()
    tau = np.asarray(tau, dtype=np.float64).ravel()
    if tau_hat.shape != tau.shape or tau.size < 2:
        raise ValueError("tau_hat and tau must have equal length >= 2")
    denom = float(np.sum((tau - tau.mean()) ** 2))
    if denom == 0.0:
        raise DegenerateMetric("degenerate CATE variance")
    return math.sqrt(float(np.sum((tau_hat - tau) ** 2)) / denom)


def rod(tau_hat, tau) -> float:
    """Rate of discordance ``(1 - tau_b)/2``; raises ``ZeroVarianceRanking``."""
    return (1.0 - kendall_tau(tau_hat, tau)) / 2.0


# ------------------------------------------------------------------ subgroups


@dataclass(frozen=True)
class SubgroupSpec:
    """Two-feature box: ``x_first <= t1`` then ``x_second <= t2``.

    ``upper`` flips the first cut to ``>=`` and ``second_upper`` the second.
    """

    first_feature: int
    second_feature: int
    t1: float
    t2: float
    member_mask: np.ndarray
    upper: bool = False
    second_upper: bool = False

    @property
    def size(self) -> int:
        return int(self.member_mask.sum())

    def contains(self, X) -> np.ndarray:
        X = as_matrix(X)
        return (_cut(X[:, self.first_feature], self.t1, self.upper)
                & _cut(X[:, self.second_feature], self.t2, self.second_upper))


def _cut(values, threshold, upper):
    return values >= threshold if upper else values <= threshold


def _box(X, j, k, upper, second_upper):
    t1 = quantile(X[:, j], 1.0 - SUBGROUP_SHARE if upper else SUBGROUP_SHARE)
    s1 = _cut(X[:, j], t1, upper)
    t2 = quantile(X[s1, k], 1.0 - SUBGROUP_SHARE if second_upper else SUBGROUP_SHARE)
    return SubgroupSpec(j, k, t1, t2, s1 & _cut(X[:, k], t2, second_upper), upper, second_upper)


def enumerate_subgroups(covariates, direction: str = "lower",
                        min_rows: int = 25) -> list[SubgroupSpec]:
    """All ordered feature pairs, each cut at the sqrt(0.2) quantile twice in a row.

    ``direction="both"`` also lets either cut come from above at the
    1 - sqrt(0.2) quantile, giving four boxes per ordered pair.
    """
    X = as_matrix(covariates)
    m, p = X.shape
    if p < 2:
        raise ValueError("need p >= 2")
    if m < min_rows:
        raise ValueError(f"need at least {min_rows} rows")
    if direction not in ("lower", "both"):
        raise ValueError("direction must be 'lower' or 'both'")
    sides = (False,) if direction == "lower" else (False, True)
    out = []
    for upper, second_upper in itertools.product(sides, sides):
        for j in range(p):
            for k in range(p):
                if j == k:
                    continue
                sg = _box(X, j, k, upper, second_upper)
                if sg.size == 0:
                    log.warning("dropping empty subgroup on features (%d, %d)", j, k)
                    continue
                out.append(sg)
    return out


def subgroup_dim_estimate(dataset: TrialDataset, sg: SubgroupSpec | np.ndarray) -> float:
    """Difference of arm means within the subgroup."""
    mask = sg.member_mask if isinstance(sg, SubgroupSpec) else np.asarray(sg, dtype=bool)
    if mask.shape != (dataset.n,):
        raise ValueError("subgroup mask must have one entry per dataset row")
    a = dataset.treatment[mask]
    y = dataset.outcome[mask]
    n1 = a.sum()
    n0 = a.size - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateMetric("subgroup lacks one treatment arm")
    return float(y @ a / n1 - y @ (1 - a) / n0)


def subgroup_means(values, subgroups) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.array([values[sg.member_mask].mean() for sg in subgroups])


def subgroup_metrics(model, evaluation: EvaluationSet | None, subgroups, mode: str = "model",
                     dataset: TrialDataset | None = None,
                     tau_hat=None) -> tuple[float, float]:
    """``(srmse_sg, rod_sg)`` over subgroup-level effects.

    Truth per subgroup is the mean true effect of its members.  With
    ``mode="model"`` the estimate is the mean model prediction over members
    (``tau_hat`` may pass precomputed predictions).  With ``mode="dim"`` it
    is the arm-mean difference in ``dataset`` and subgroups lacking an arm
    are skipped.  A metric that is undefined comes back as ``nan``.
    """
    subgroups = list(subgroups)
    if mode == "model":
        if tau_hat is None:
            tau_hat = model.predict_cate(evaluation.covariates)
        est = subgroup_means(tau_hat, subgroups)
        truth = subgroup_means(evaluation.true_cate, subgroups)
    elif mode == "dim":
        if dataset is None or evaluation is None:
            raise ValueError("mode='dim' needs the dataset and its true effects")
        est, truth = [], []
        for sg in subgroups:
            try:
                est.append(subgroup_dim_estimate(dataset, sg))
            except DegenerateMetric:
                continue
            truth.append(float(evaluation.true_cate[sg.member_mask].mean()))
        est, truth = np.array(est), np.array(truth)
    else:
        raise ValueError("mode must be 'model' or 'dim'")
    if truth.size < 2:
        raise DegenerateMetric("fewer than two usable subgroups")
    try:
        s = srmse(est, truth)
    except DegenerateMetric:
        s = float("nan")
    try:
        r = rod(est, truth)
    except ZeroVarianceRanking:
        r = float("nan")
    return s, r


# --------------------------------------------------------------------- report


METRIC_NAMES = ("srmse", "rod", "srmse_sg", "rod_sg")


@dataclass(frozen=True)
class MetricReport:
    scenario: str
    p: int
    n: int
    replicate: int
    model: str
    srmse: float
    rod: float
    srmse_sg: float
    rod_sg: float

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def evaluate(tau_hat, evaluation: EvaluationSet, subgroups) -> dict[str, float]:
    """All four metrics for one prediction vector; undefined ones are ``nan``."""
    out = {}
    for name, fn in (("srmse", srmse), ("rod", rod)):
        try:
            out[name] = fn(tau_hat, evaluation.true_cate)
        except (DegenerateMetric, ZeroVarianceRanking):
            out[name] = float("nan")
    if subgroups:
        try:
            out["srmse_sg"], out["rod_sg"] = subgroup_metrics(None, evaluation, subgroups,
                                                             tau_hat=tau_hat)
        except DegenerateMetric:
            out["srmse_sg"] = out["rod_sg"] = float("nan")
    else:
        out["srmse_sg"] = out["rod_sg"] = float("nan")
    return out
