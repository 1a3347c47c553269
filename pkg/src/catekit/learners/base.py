"""Regressor contract and content-keyed resampling.

Resampling draws (bootstrap counts, subsamples, internal CV folds) are keyed
on a hash of each row's *values*, not its position, so a fitted learner does
not depend on the order of the training rows.
"""
from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


@runtime_checkable
class FittedRegressor(Protocol):
    def predict(self, X) -> np.ndarray: ...


@runtime_checkable
class Regressor(Protocol):
    seed: int

    def fit(self, X, y, weights=None) -> FittedRegressor: ...


def mix_scalar(*parts: int) -> int:
    """Deterministic 64-bit mixing of integers (splitmix64 finaliser chain)."""
    h = 0x243F6A8885A308D3
    for part in parts:
        h = (h ^ (int(part) & _MASK)) & _MASK
        h = (h + _GOLDEN) & _MASK
        z = h
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        h = z ^ (z >> 31)
    return h


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def row_keys(X, y=None) -> np.ndarray:
    """64-bit content hash per row of ``[X | y]``."""
    X = np.asarray(X, dtype=np.float64)
    cols = [X] if y is None else [X, np.asarray(y, dtype=np.float64)[:, None]]
    data = np.ascontiguousarray(np.hstack(cols) + 0.0)  # folds -0.0 into 0.0
    bits = data.view(np.uint64)
    h = np.full(data.shape[0], np.uint64(0x243F6A8885A308D3))
    with np.errstate(over="ignore"):
        for j in range(bits.shape[1]):
            h = _mix(h ^ bits[:, j])
    return h


def stream_keys(keys: np.ndarray, seed: int, stream: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix(keys ^ np.uint64(mix_scalar(seed, stream)))


def _uniform(keys: np.ndarray) -> np.ndarray:
    return (keys >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _poisson_cdf(rate: float, kmax: int = 40) -> np.ndarray:
    k = np.arange(kmax)
    logp = -rate + k * math.log(rate) - np.array([math.lgamma(i + 1) for i in k])
    return np.cumsum(np.exp(logp))


def resample(keys: np.ndarray, seed: int, stream: int, fraction: float = 1.0,
             replace: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rows and integer multiplicities of one resampling draw.

    With replacement, each row's multiplicity is Poisson(``fraction``) from
    its own key (a row-order free bootstrap).  Without replacement, the
    ``round(fraction * n)`` rows with the smallest keys are kept.
    """
    n = keys.size
    k = stream_keys(keys, seed, stream)
    if replace:
        counts = np.searchsorted(_poisson_cdf(fraction), _uniform(k), side="right")
        rows = np.flatnonzero(counts > 0)
        if rows.size == 0:
            return np.arange(n), np.ones(n, dtype=np.int64)
        return rows, counts[rows].astype(np.int64)
    m = min(n, max(1, int(round(fraction * n))))
    if m == n:
        return np.arange(n), np.ones(n, dtype=np.int64)
    rows = np.sort(np.lexsort((keys, k))[:m])
    return rows, np.ones(m, dtype=np.int64)


def split_by_key(keys: np.ndarray, seed: int, stream: int, fraction: float):
    """Partition positions into two halves by key rank (first gets ``fraction``)."""
    k = stream_keys(keys, seed, stream)
    order = np.lexsort((keys, k))
    m = int(round(fraction * keys.size))
    return np.sort(order[:m]), np.sort(order[m:])


def keyed_folds(keys: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold labels dealt round-robin in key order (sizes differ by at most one)."""
    order = np.lexsort((keys, stream_keys(keys, seed, 0xF01D)))
    fold_of = np.empty(keys.size, dtype=np.int64)
    fold_of[order] = np.arange(keys.size) % k
    return fold_of


class ConstantModel:
    def __init__(self, value: float):
        self.value = float(value)

    def predict(self, X) -> np.ndarray:
        return np.full(np.asarray(X).reshape(len(X), -1).shape[0], self.value)
