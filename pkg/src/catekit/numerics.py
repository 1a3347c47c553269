"""Least-squares solvers, elastic net, logistic regression and Kendall's tau.

Design matrices are plain 2-D float arrays (rows are units).  All fits are
deterministic functions of their inputs and return immutable results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import NUMERIC


class ZeroVarianceRanking(ValueError):
    """Raised when a rank correlation involves a constant vector."""

    def __init__(self, msg: str = "zero-variance ranking"):
        super().__init__(msg)


def as_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(X)


def as_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if n is not None and y.shape[0] != n:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite entries")
    return y


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = as_vector(weights, n, "weights")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not w.sum() > 0:
        raise ValueError("weights are all zero")
    return w


@dataclass(frozen=True)
class LinearFit:
    intercept: float
    coefficients: np.ndarray
    converged: bool = True
    iterations: int = 0

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        return self.intercept + X @ self.coefficients


@dataclass(frozen=True)
class LogisticFit(LinearFit):
    degenerate: bool = False
    clip: tuple[float, float] = NUMERIC.propensity_clip

    def predict_probability(self, X) -> np.ndarray:
        eta = self.predict(X)
        p = 0.5 * (1.0 + np.tanh(0.5 * eta))
        return np.clip(p, *self.clip)


# ---------------------------------------------------------------- least squares


def fit_ols(X, y, weights=None) -> LinearFit:
    """Weighted least squares with an intercept.

    The centred normal equations get a ``1e-10`` diagonal jitter, so
    rank-deficient designs return a finite (near minimum-norm) solution.
    """
    X = as_matrix(X)
    n, d = X.shape
    y = as_vector(y, n)
    w = _weights(weights, n)
    sw = w.sum()
    xbar = w @ X / sw
    ybar = float(w @ y / sw)
    Xc = X - xbar
    yc = y - ybar
    gram = Xc.T @ (w[:, None] * Xc)
    rhs = Xc.T @ (w * yc)
    gram[np.diag_indices(d)] += NUMERIC.ols_ridge_jitter
    beta = np.linalg.solve(gram, rhs)
    return LinearFit(ybar - float(xbar @ beta), beta, True, 1)


def fit_nnls(X, y, max_iter: int | None = None) -> LinearFit:
    """Lawson-Hanson active-set solution of ``min |y - Xb|^2, b >= 0``."""
    X = as_matrix(X)
    n, d = X.shape
    y = as_vector(y, n)
    if max_iter is None:
        max_iter = 3 * d + 30
    eps = np.finfo(float).eps
    tol = 10 * eps * max(n, d) * max(1.0, float(np.abs(X).max()), float(np.abs(y).max())) ** 2

    x = np.zeros(d)
    passive = np.zeros(d, dtype=bool)
    w = X.T @ (y - X @ x)
    it = 0
    converged = True
    while (~passive).any() and np.max(np.where(passive, -np.inf, w)) > tol:
        if it >= max_iter:
            converged = False
            break
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        passive[j] = True
        while True:
            it += 1
            idx = np.flatnonzero(passive)
            s = np.zeros(d)
            s[idx] = np.linalg.lstsq(X[:, idx], y, rcond=None)[0]
            if np.all(s[idx] > 0):
                break
            bad = idx[s[idx] <= 0]
            ratios = x[bad] / (x[bad] - s[bad])
            k = int(np.argmin(ratios))
            x = x + ratios[k] * (s - x)
            x[bad[k]] = 0.0
            passive &= x > 1e-15 * max(1.0, float(np.abs(x).max()))
            x[~passive] = 0.0
            if not passive.any():
                s = np.zeros(d)
                break
        x = s
        w = X.T @ (y - X @ x)
    return LinearFit(0.0, np.maximum(x, 0.0), converged, it)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _simplex_kkt_polish(G, c, alpha):
    """Exact equality-constrained solve on the support of ``alpha``.

    Works on the Gram form ``a'Ga - 2c'a``.  Returns the polished point if
    it is feasible and satisfies the simplex KKT conditions, else ``None``.
    """
    d = alpha.size
    support = np.flatnonzero(alpha > 1e-10)
    k = support.size
    if k == 0:
        return None
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * G[np.ix_(support, support)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([2.0 * c[support], [1.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    a_s = sol[:k]
    if not np.all(np.isfinite(a_s)) or np.any(a_s < 0):
        return None
    cand = np.zeros(d)
    cand[support] = a_s
    grad = 2.0 * (G @ cand - c)
    level = grad[support].mean()
    scale = max(1.0, float(np.abs(grad).max()))
    if np.any(np.abs(grad[support] - level) > 1e-8 * scale):
        return None
    off = np.setdiff1d(np.arange(d), support)
    if off.size and np.any(grad[off] < level - 1e-9 * scale):
        return None
    return cand / cand.sum()


def fit_simplex_ls(X, y, max_iter: int = 50_000, polish_every: int = 25) -> LinearFit:
    """Least squares over the probability simplex.

    Accelerated projected gradient (with restart); every ``polish_every``
    iterations the detected support is solved exactly and the iteration
    stops once that point satisfies the KKT conditions.
    """
    X = as_matrix(X)
    n, d = X.shape
    y = as_vector(y, n)
    if d == 1:
        return LinearFit(0.0, np.ones(1), True, 0)
    G = X.T @ X
    c = X.T @ y

    def objective(a):
        return float(a @ G @ a - 2.0 * c @ a)

    lip = 2.0 * float(np.linalg.eigvalsh(G)[-1])
    step = 1.0 / max(lip, 1e-300)
    alpha = np.full(d, 1.0 / d)
    z = alpha.copy()
    t = 1.0
    obj_prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new = project_simplex(z - step * 2.0 * (G @ z - c))
        obj = objective(new)
        change = 0.0
        if obj > obj_prev + 1e-14 * (1.0 + abs(obj_prev)):
            # restart momentum from the last accepted point
            t = 1.0
            z = alpha.copy()
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = new + ((t - 1.0) / t_next) * (new - alpha)
            change = float(np.max(np.abs(new - alpha)))
            alpha = new
            t = t_next
            obj_prev = min(obj, obj_prev)
        stalled = 0.0 < change < 1e-15
        if stalled or it % polish_every == 0:
            polished = _simplex_kkt_polish(G, c, alpha)
            if polished is not None:  # a KKT point of a convex problem is optimal
                return LinearFit(0.0, polished, True, it)
        if stalled:
            break
    alpha = alpha / alpha.sum()
    return LinearFit(0.0, alpha, False, it)


# ---------------------------------------------------------------- elastic net


class EnetProblem:
    """Standardised weighted elastic-net problem, reusable along a lambda path.

    Features are standardised with weighted means and (population) standard
    deviations; the target is centred.  The penalty acts on the standardised
    coefficients.
    """

    def __init__(self, X, y, weights=None):
        X = as_matrix(X)
        n, d = X.shape
        y = as_vector(y, n)
        w = _weights(weights, n)
        w = w * (n / w.sum())
        self.n, self.d = n, d
        self.x_mean = w @ X / n
        self.y_mean = float(w @ y / n)
        sd = np.sqrt(w @ (X - self.x_mean) ** 2 / n)
        self.x_scale = np.where(sd > 1e-12 * (1.0 + np.abs(self.x_mean)), sd, 0.0)
        inv = np.divide(1.0, self.x_scale, out=np.zeros(d), where=self.x_scale > 0)
        Xs = (X - self.x_mean) * inv
        self.gram = np.ascontiguousarray(Xs.T @ (w[:, None] * Xs) / n)
        self.corr = np.ascontiguousarray(Xs.T @ (w * (y - self.y_mean)) / n)

    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.corr))) if self.d else 0.0

    def solve(self, lambda1: float, lambda2: float, beta0=None,
              tol: float = NUMERIC.enet_tol, max_sweeps: int = NUMERIC.enet_max_sweeps):
        beta = np.zeros(self.d) if beta0 is None else np.array(beta0, dtype=np.float64)
        sweeps, ok = kernels.enet_cd_gram(self.gram, self.corr, beta, float(lambda1),
                                          float(lambda2), float(tol), int(max_sweeps))
        return beta, int(sweeps), bool(ok)

    def to_fit(self, beta_std, sweeps: int = 0, converged: bool = True) -> LinearFit:
        coef = np.divide(beta_std, self.x_scale, out=np.zeros(self.d), where=self.x_scale > 0)
        return LinearFit(self.y_mean - float(self.x_mean @ coef), coef, converged, sweeps)


def fit_elastic_net(X, y, lambda1: float, lambda2: float, weights=None) -> LinearFit:
    """Elastic net by cyclic coordinate descent on standardised features.

    Minimises ``(1/2n) sum w (y - b - x'beta)^2 + lambda1 |beta|_1 +
    (lambda2/2) |beta|^2`` with weights rescaled to mean one; coefficients are
    reported on the original feature scale.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalties must be non-negative")
    prob = EnetProblem(X, y, weights)
    beta, sweeps, ok = prob.solve(lambda1, lambda2)
    return prob.to_fit(beta, sweeps, ok)


# ------------------------------------------------------------------- logistic


def fit_logistic(X, y01, ridge: float = NUMERIC.logistic_ridge,
                 max_iter: int = NUMERIC.logistic_max_iter) -> LogisticFit:
    """Ridge-guarded logistic regression by Newton-Raphson (IRLS).

    A single-class target yields a constant fit at the clipped class rate,
    flagged ``degenerate``.
    """
    X = as_matrix(X)
    n, d = X.shape
    y = as_vector(y01, n, "y01")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y01 must be binary 0/1")
    lo, hi = NUMERIC.propensity_clip
    rate = float(y.mean())
    if rate in (0.0, 1.0):
        r = min(max(rate, lo), hi)
        return LogisticFit(math.log(r / (1 - r)), np.zeros(d), True, 0, degenerate=True)

    Xa = np.hstack([np.ones((n, 1)), X])
    pen = np.full(d + 1, ridge)
    pen[0] = 0.0
    beta = np.zeros(d + 1)
    beta[0] = math.log(rate / (1 - rate))

    def objective(b):
        eta = Xa @ b
        return float(y @ eta - np.logaddexp(0.0, eta).sum() - 0.5 * pen @ (b * b))

    obj = objective(beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Xa @ beta
        p = 0.5 * (1.0 + np.tanh(0.5 * eta))
        grad = Xa.T @ (y - p) - pen * beta
        hess = Xa.T @ ((p * (1 - p))[:, None] * Xa) + np.diag(pen)
        hess[np.diag_indices(d + 1)] += 1e-12
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        while True:
            cand = beta + scale * step
            cand_obj = objective(cand)
            if cand_obj >= obj - 1e-12 * abs(obj) or scale < 1e-10:
                break
            scale *= 0.5
        gain = cand_obj - obj
        beta, obj = cand, cand_obj
        if np.max(np.abs(scale * step)) < 1e-9 or abs(gain) < 1e-13 * (1 + abs(obj)):
            converged = True
            break
    return LogisticFit(float(beta[0]), beta[1:].copy(), converged, it)


# ---------------------------------------------------------------- Kendall tau


def _tau_from_counts(n0: int, ties_u: int, ties_v: int, s: int, variant: str) -> float:
    if variant == "a":
        return s / n0
    if variant != "b":
        raise ValueError(f"unknown Kendall variant {variant!r}")
    return s / math.sqrt((n0 - ties_u) * (n0 - ties_v))


def kendall_pair_counts(u, v) -> tuple[int, int, int, int]:
    """O(n^2) enumeration: ``(n0, ties_u, ties_v, concordant - discordant)``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i, j = np.triu_indices(u.size, k=1)
    du = np.sign(u[i] - u[j]).astype(np.int64)
    dv = np.sign(v[i] - v[j]).astype(np.int64)
    return int(i.size), int((du == 0).sum()), int((dv == 0).sum()), int((du * dv).sum())


def kendall_merge_counts(u, v) -> tuple[int, int, int, int]:
    """O(n log n) counts via a merge-sort inversion count (Knight's method)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    order = np.lexsort((v, u))
    n0, tu, tv, tuv, swaps = kernels.kendall_counts(u[order], v[order])
    return n0, tu, tv, n0 - tu - tv + tuv - 2 * swaps


def kendall_tau(u, v, variant: str | None = None, method: str = "merge") -> float:
    """Kendall rank correlation (tau-b by default).

    ``method="pairs"`` enumerates all pairs; both paths return identical
    values because they share the final integer-to-float step.
    """
    u = as_vector(u, name="u")
    v = as_vector(v, u.size, "v")
    if u.size < 2:
        raise ValueError("need at least two observations")
    if np.all(u == u[0]) or np.all(v == v[0]):
        raise ZeroVarianceRanking()
    counts = kendall_merge_counts(u, v) if method == "merge" else kendall_pair_counts(u, v)
    n0, tu, tv, s = counts
    return _tau_from_counts(n0, tu, tv, s, variant or NUMERIC.kendall_variant)
