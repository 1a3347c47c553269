"""Trial datasets, evaluation sets, cross-fitting folds and the CSV schema."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import as_matrix, as_vector


@dataclass(frozen=True)
class TrialDataset:
    """Covariates ``X`` (n x p), binary treatment ``A`` and outcome ``Y``."""

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    id: str = "trial"
    seed_provenance: int | None = None
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = as_matrix(self.covariates, "covariates")
        n = X.shape[0]
        a = as_vector(self.treatment, n, "treatment")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("treatment must be 0/1")
        y = as_vector(self.outcome, n, "outcome")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("column_names length does not match covariates")
        for arr in (X, a, y):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", a)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def treated(self) -> np.ndarray:
        return self.treatment == 1

    def arm_sizes(self) -> tuple[int, int]:
        n1 = int(self.treatment.sum())
        return self.n - n1, n1

    def require_both_arms(self, minimum: int = 1) -> None:
        n0, n1 = self.arm_sizes()
        if min(n0, n1) < minimum:
            raise ValueError(
                f"each arm needs at least {minimum} units (control={n0}, treated={n1})"
            )

    def subset(self, rows) -> TrialDataset:
        rows = np.asarray(rows)
        return TrialDataset(self.covariates[rows], self.treatment[rows], self.outcome[rows],
                            self.id, self.seed_provenance, self.column_names)


@dataclass(frozen=True)
class EvaluationSet:
    """Covariates with the true CATE (and optionally potential-outcome means)."""

    covariates: np.ndarray
    true_cate: np.ndarray
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None

    def __post_init__(self):
        X = as_matrix(self.covariates, "covariates")
        tau = as_vector(self.true_cate, X.shape[0], "true_cate")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "true_cate", tau)
        if (self.mu0 is None) != (self.mu1 is None):
            raise ValueError("mu0 and mu1 must be given together")
        if self.mu0 is not None:
            mu0 = as_vector(self.mu0, X.shape[0], "mu0")
            mu1 = as_vector(self.mu1, X.shape[0], "mu1")
            if np.max(np.abs(mu1 - mu0 - tau)) > 1e-10 * (1.0 + np.max(np.abs(tau))):
                raise ValueError("true_cate must equal mu1 - mu0")
            object.__setattr__(self, "mu0", mu0)
            object.__setattr__(self, "mu1", mu1)

    @property
    def m(self) -> int:
        return self.covariates.shape[0]


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int
    stratified: bool = True

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.fold_of == fold
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def __iter__(self):
        for fold in range(self.k):
            yield self.train_test(fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def assign_folds(n: int, k: int, seed: int, strata=None) -> np.ndarray:
    """Balanced fold labels; with ``strata`` each stratum is dealt round-robin.

    Units are shuffled within stratum and dealt continuing one running
    counter, so overall fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng(seed)
    if strata is None:
        groups = [np.arange(n)]
    else:
        strata = np.asarray(strata)
        groups = [np.flatnonzero(strata == s) for s in np.unique(strata)]
    fold_of = np.empty(n, dtype=np.int64)
    pos = 0
    for g in groups:
        perm = g[rng.permutation(g.size)]
        fold_of[perm] = (pos + np.arange(g.size)) % k
        pos += g.size
    return fold_of


def make_folds(dataset: TrialDataset, k: int, seed: int) -> FoldAssignment:
    """Treatment-stratified fold assignment for cross-fitting."""
    if dataset.n < 2 * k:
        raise ValueError(f"n={dataset.n} too small for {k} folds")
    n0, n1 = dataset.arm_sizes()
    if min(n0, n1) < k:
        warnings.warn("an arm is smaller than k; using unstratified folds", stacklevel=2)
        return FoldAssignment(assign_folds(dataset.n, k, seed), k, seed, stratified=False)
    return FoldAssignment(assign_folds(dataset.n, k, seed, dataset.treatment), k, seed)


def quantile(values, q: float) -> float:
    """Empirical quantile with linear interpolation between order statistics."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty values")
    return float(np.quantile(values, q, method="linear"))


# ------------------------------------------------------------------ CSV schema


def write_csv(path, dataset: TrialDataset, tau=None, mu0=None, mu1=None) -> None:
    """Write ``x1..xp, a, y`` plus any of ``tau, mu0, mu1`` (repr precision)."""
    cols = {f"x{j + 1}": dataset.covariates[:, j] for j in range(dataset.p)}
    cols["a"] = dataset.treatment
    cols["y"] = dataset.outcome
    for name, arr in (("tau", tau), ("mu0", mu0), ("mu1", mu1)):
        if arr is not None:
            cols[name] = as_vector(arr, dataset.n, name)
    names = list(cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(dataset.n):
            row = []
            for name in names:
                v = float(cols[name][i])
                row.append(str(int(v)) if name == "a" else repr(v))
            writer.writerow(row)


def read_csv(path) -> tuple[TrialDataset, dict[str, np.ndarray]]:
    """Read the shared schema; returns the dataset and any extra columns."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    xcols = sorted((h for h in header if h.startswith("x") and h[1:].isdigit()),
                   key=lambda h: int(h[1:]))
    missing = [c for c in ("a", "y") if c not in header]
    if missing or not xcols:
        raise ValueError(f"{path}: missing required columns {missing or ['x1..xp']}")
    idx = {h: i for i, h in enumerate(header)}
    ds = TrialDataset(data[:, [idx[c] for c in xcols]], data[:, idx["a"]], data[:, idx["y"]],
                      id=path.stem, column_names=tuple(xcols))
    extras = {c: data[:, idx[c]] for c in ("tau", "mu0", "mu1") if c in idx}
    return ds, extras
