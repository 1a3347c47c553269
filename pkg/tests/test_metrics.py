import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catekit.data import EvaluationSet, TrialDataset
from catekit.metrics import (
    METRIC_NAMES,
    DegenerateMetric,
    SubgroupSpec,
    enumerate_subgroups,
    evaluate,
    rod,
    srmse,
    subgroup_dim_estimate,
    subgroup_means,
    subgroup_metrics,
)
from catekit.numerics import ZeroVarianceRanking


class Const:
    label = "const"

    def __init__(self, fn):
        self.fn = fn

    def predict_cate(self, X):
        return self.fn(np.asarray(X))


def mask_group(mask, j=0, k=1):
    return SubgroupSpec(j, k, 0.0, 0.0, np.asarray(mask, dtype=bool))


# ----------------------------------------------------------------- sRMSE/RoD


def test_srmse_examples(rng):
    tau = rng.standard_normal(20)
    assert srmse(tau, tau) == 0.0
    assert srmse(np.full(20, tau.mean()), tau) == pytest.approx(1.0)
    assert srmse([0, 0, 0], [0, 1, 2]) == pytest.approx(math.sqrt(5 / 2))


def test_srmse_degenerate():
    with pytest.raises(DegenerateMetric, match="degenerate CATE variance"):
        srmse([1, 2, 3], [1, 1, 1])
    with pytest.raises(ValueError):
        srmse([1, 2], [1, 2, 3])


def test_rod_examples(rng):
    tau = rng.standard_normal(15)
    assert rod(tau, tau) == 0.0
    assert rod(-tau, tau) == 1.0
    assert rod([1, 3, 2, 4], [1, 2, 3, 4]) == pytest.approx(1 / 6)
    with pytest.raises(ZeroVarianceRanking):
        rod([2, 2, 2], [1, 2, 3])


vectors = st.integers(0, 10_000).map(lambda s: np.random.default_rng(s).standard_normal((2, 12)))


@given(vectors, st.floats(-100, 100), st.floats(0.1, 10))
def test_srmse_shift_and_scale(v, c, s):
    tau_hat, tau = v
    assert srmse(tau_hat + c, tau + c) == pytest.approx(srmse(tau_hat, tau), rel=1e-6)
    denom = np.sqrt(np.sum((tau - tau.mean()) ** 2))
    num = np.sqrt(np.sum((tau_hat - s * tau) ** 2))
    assert srmse(tau_hat, s * tau) == pytest.approx(num / (s * denom), rel=1e-9)


@given(vectors)
def test_rod_monotone_invariant(v):
    tau_hat, tau = v
    assert rod(np.exp(tau_hat), tau) == rod(tau_hat, tau)
    assert rod(tau_hat ** 3, tau) == rod(tau_hat, tau)


# ---------------------------------------------------------------- subgroups


def test_subgroup_count_and_pairs(rng):
    groups = enumerate_subgroups(rng.standard_normal((200, 5)))
    assert len(groups) == 20
    assert {(g.first_feature, g.second_feature) for g in groups} == \
        {(j, k) for j in range(5) for k in range(5) if j != k}
    pair = enumerate_subgroups(rng.standard_normal((50, 2)))
    assert [(g.first_feature, g.second_feature) for g in pair] == [(0, 1), (1, 0)]
    assert len(enumerate_subgroups(rng.standard_normal((200, 4)), "both")) == 4 * 12


def test_subgroup_median_size_uniform():
    X = np.random.default_rng(5000).uniform(size=(5000, 4))
    for direction in ("lower", "both"):
        sizes = [g.size for g in enumerate_subgroups(X, direction)]
        assert 0.18 * 5000 <= np.median(sizes) <= 0.22 * 5000


def test_subgroup_membership_is_sequential(rng):
    X = rng.standard_normal((100, 3))
    for g in enumerate_subgroups(X, "both"):
        np.testing.assert_array_equal(g.contains(X), g.member_mask)
        inside = X[g.member_mask]
        for col, t, up in ((g.first_feature, g.t1, g.upper),
                           (g.second_feature, g.t2, g.second_upper)):
            assert np.all(inside[:, col] >= t) if up else np.all(inside[:, col] <= t)


def test_subgroups_row_order_invariant(rng):
    X = rng.standard_normal((80, 3))
    perm = rng.permutation(80)
    a = enumerate_subgroups(X)
    b = enumerate_subgroups(X[perm])
    for ga, gb in zip(a, b):
        assert (ga.t1, ga.t2) == (gb.t1, gb.t2)
        np.testing.assert_array_equal(ga.member_mask[perm], gb.member_mask)


def test_subgroup_validation(rng):
    with pytest.raises(ValueError):
        enumerate_subgroups(rng.standard_normal((100, 1)))
    with pytest.raises(ValueError):
        enumerate_subgroups(rng.standard_normal((10, 3)))
    with pytest.raises(ValueError):
        enumerate_subgroups(rng.standard_normal((100, 3)), "upper")


def test_dim_estimate_examples():
    ds = TrialDataset(np.zeros((4, 2)), [1, 1, 0, 0], [3.0, 5.0, 1.0, 2.0])
    assert subgroup_dim_estimate(ds, mask_group([1, 1, 1, 1])) == 2.5
    flat = TrialDataset(np.zeros((4, 2)), [1, 1, 0, 0], [7.0] * 4)
    assert subgroup_dim_estimate(flat, np.ones(4, bool)) == 0.0
    y_is_a = TrialDataset(np.zeros((4, 2)), [1, 0, 1, 0], [1.0, 0.0, 1.0, 0.0])
    assert subgroup_dim_estimate(y_is_a, np.ones(4, bool)) == 1.0
    with pytest.raises(DegenerateMetric):
        subgroup_dim_estimate(ds, np.array([1, 1, 0, 0], bool))


def test_union_of_disjoint_groups_mean(rng):
    v = rng.standard_normal(30)
    labels = rng.integers(0, 3, 30)
    groups = [mask_group(labels == i) for i in range(3)]
    means = subgroup_means(v, groups)
    sizes = np.array([g.size for g in groups])
    assert v.mean() == pytest.approx(means @ sizes / sizes.sum(), abs=1e-12)


def crafted_eval():
    X = np.zeros((6, 2))
    tau = np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0])
    groups = [mask_group([1, 1, 0, 0, 0, 0]), mask_group([0, 0, 1, 1, 0, 0]),
              mask_group([0, 0, 0, 0, 1, 1])]
    return EvaluationSet(X, tau), groups


def test_subgroup_metrics_perfect_and_constant():
    ev, groups = crafted_eval()
    assert subgroup_metrics(None, ev, groups, tau_hat=ev.true_cate) == (0.0, 0.0)
    s, r = subgroup_metrics(Const(lambda X: np.zeros(len(X))), ev, groups)
    assert s == pytest.approx(math.sqrt(5 / 2))
    assert math.isnan(r)


def test_subgroup_metrics_dim_mode():
    X = np.zeros((8, 2))
    tau = np.array([0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0])
    A = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=float)
    Y = A * tau
    ds = TrialDataset(X, A, Y)
    groups = [mask_group(np.arange(8) < 4), mask_group(np.arange(8) >= 4),
              mask_group([1, 0, 1, 0, 0, 0, 0, 0])]  # last lacks controls: skipped
    s, r = subgroup_metrics(None, EvaluationSet(X, tau), groups, mode="dim", dataset=ds)
    assert s == 0.0 and r == 0.0
    with pytest.raises(ValueError):
        subgroup_metrics(None, EvaluationSet(X, tau), groups, mode="dim")
    with pytest.raises(ValueError):
        subgroup_metrics(None, EvaluationSet(X, tau), groups, mode="box")


def test_subgroup_metrics_need_two_groups():
    ev, groups = crafted_eval()
    with pytest.raises(DegenerateMetric):
        subgroup_metrics(None, ev, groups[:1], tau_hat=ev.true_cate)


def test_evaluate_oracle_and_constant(rng):
    X = rng.standard_normal((300, 3))
    tau = X[:, 0] - X[:, 1]
    ev = EvaluationSet(X, tau)
    groups = enumerate_subgroups(X)
    out = evaluate(tau, ev, groups)
    assert set(out) == set(METRIC_NAMES)
    assert all(v == 0.0 for v in out.values())
    flat = evaluate(np.zeros(300), ev, groups)
    assert flat["srmse"] == pytest.approx(np.sqrt(np.sum(tau ** 2) / np.sum((tau - tau.mean()) ** 2)))
    assert math.isnan(flat["rod"]) and math.isnan(flat["rod_sg"])
    assert math.isnan(evaluate(tau, ev, [])["srmse_sg"])
