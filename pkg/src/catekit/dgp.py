"""Data-generating processes with analytic treatment effects.

Three sources: an additive family with pairwise interactions (prognostic
part plus a treatment-modified predictive part), a mechanistic PD-L1
immunotherapy model, and resampling of an external CSV with known effects.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .data import EvaluationSet, TrialDataset, read_csv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

TRANSFORMS = {
    "identity": lambda x: x,
    "sin": np.sin,
    "tanh": np.tanh,
    "square": np.square,
    "abs": np.abs,
    "step": lambda x: (x > 0).astype(np.float64),
}


def _transform(name: str):
    try:
        return TRANSFORMS[name]
    except KeyError:
        raise ValueError(f"unknown transform {name!r}; choose from {sorted(TRANSFORMS)}") from None


# ----------------------------------------------------------- additive family


@dataclass(frozen=True)
class ScenarioSpec:
    """Coefficients of ``Y = prog(X) + tau(X) * A + eps``.

    ``prog = sum_j beta_j f_j(x_j) + sum_jk beta_jk f_j(x_j) f_k(x_k)`` and
    ``tau`` has the same form with ``delta`` and ``g``.  Feature indices are
    zero-based; transforms default to ``identity`` for unlisted features.
    """

    name: str
    p: int
    beta: dict[int, float] = field(default_factory=dict)
    beta_pairs: dict[tuple[int, int], float] = field(default_factory=dict)
    delta: dict[int, float] = field(default_factory=dict)
    delta_pairs: dict[tuple[int, int], float] = field(default_factory=dict)
    f: dict[int, str] = field(default_factory=dict)
    g: dict[int, str] = field(default_factory=dict)
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        for coefs in (self.beta, self.delta, self.f, self.g):
            for j in coefs:
                if not 0 <= j < self.p:
                    raise ValueError(f"feature index {j} outside [0, {self.p})")
        for pairs in (self.beta_pairs, self.delta_pairs):
            for j, k in pairs:
                if j == k or not (0 <= j < self.p and 0 <= k < self.p):
                    raise ValueError(f"invalid interaction ({j}, {k})")
        for name in (*self.f.values(), *self.g.values()):
            _transform(name)

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioSpec:
        def singles(t):
            return {int(k): float(v) for k, v in t.items()}

        def pairs(t):
            out = {}
            for k, v in t.items():
                j, m = (int(s) for s in str(k).split(","))
                out[(j, m)] = float(v)
            return out

        prog, pred = d.get("prognostic", {}), d.get("predictive", {})
        return cls(
            name=str(d["name"]),
            p=int(d["p"]),
            beta=singles(prog.get("singles", {})),
            beta_pairs=pairs(prog.get("pairs", {})),
            f={int(k): str(v) for k, v in prog.get("transforms", {}).items()},
            delta=singles(pred.get("singles", {})),
            delta_pairs=pairs(pred.get("pairs", {})),
            g={int(k): str(v) for k, v in pred.get("transforms", {}).items()},
            noise_sd=float(d.get("noise_sd", 1.0)),
        )

    @classmethod
    def from_toml(cls, path) -> ScenarioSpec:
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def _part(self, X, singles, pairs, transforms) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"expected an (m, {self.p}) covariate matrix")
        cache = {}

        def t(j):
            if j not in cache:
                cache[j] = _transform(transforms.get(j, "identity"))(X[:, j])
            return cache[j]

        out = np.zeros(X.shape[0])
        for j, c in sorted(singles.items()):
            out += c * t(j)
        for (j, k), c in sorted(pairs.items()):
            out += c * t(j) * t(k)
        return out

    def prognostic(self, X) -> np.ndarray:
        return self._part(X, self.beta, self.beta_pairs, self.f)

    def cate(self, X) -> np.ndarray:
        return self._part(X, self.delta, self.delta_pairs, self.g)

    def outcome(self, X, A, noise) -> np.ndarray:
        """Structural outcome for given treatment and standard-normal noise draws."""
        return self.prognostic(X) + self.cate(X) * np.asarray(A, dtype=np.float64) \
            + self.noise_sd * np.asarray(noise, dtype=np.float64)


PRESETS = ("linear-p10", "slightly-nl-p10", "slightly-nl-p20", "highly-nl-p10")


def load_preset(name: str) -> ScenarioSpec:
    """One of the versioned scenario files shipped with the package."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    with resources.files("catekit.presets").joinpath(f"{name}.toml").open("rb") as fh:
        return ScenarioSpec.from_dict(tomllib.load(fh))


def _spec(spec) -> ScenarioSpec:
    return load_preset(spec) if isinstance(spec, str) else spec


def gen_linear_family(spec: ScenarioSpec | str, n: int, seed: int,
                      test_size: int = 5000) -> tuple[TrialDataset, EvaluationSet]:
    """Training trial of size ``n`` plus an independent evaluation sample.

    ``X`` is i.i.d. standard normal and ``A`` is Bernoulli(0.5).
    """
    spec = _spec(spec)
    if n < 1 or test_size < 1:
        raise ValueError("n and test_size must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, spec.p))
    A = rng.binomial(1, 0.5, n).astype(np.float64)
    Y = spec.outcome(X, A, rng.standard_normal(n))
    Xe = rng.standard_normal((test_size, spec.p))
    mu0 = spec.prognostic(Xe)
    tau = spec.cate(Xe)
    train = TrialDataset(X, A, Y, id=spec.name, seed_provenance=seed)
    return train, EvaluationSet(Xe, tau, mu0, mu0 + tau)


def linear_family_potential_outcomes(spec: ScenarioSpec | str, n: int, seed: int,
                                     common_noise: bool = False):
    """Covariates and both potential outcomes ``(X, Y0, Y1)`` for Monte-Carlo checks."""
    spec = _spec(spec)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, spec.p))
    e0 = rng.standard_normal(n)
    e1 = e0 if common_noise else rng.standard_normal(n)
    return X, spec.outcome(X, np.zeros(n), e0), spec.outcome(X, np.ones(n), e1)


# -------------------------------------------------------------------- PD-L1


@dataclass(frozen=True)
class Pdl1Params:
    """Structural coefficients of the PD-L1 pathway model.

    Phenotype ``I`` (0 desert, 1 excluded, 2 inflamed) raises TGF-beta
    (``a1``) and baseline CD8 (``b1``); TGF-beta lowers post-treatment CD8
    (``c1 < 0``); each PD-L1 level removed by treatment adds ``c2 * M`` CD8
    cells; growth is ``d1 * M - d2 * E_post``.
    """

    phenotype_probs: tuple[float, float, float] = (0.3, 0.4, 0.3)
    mutation_log_sd: float = 0.5
    a0: float = 1.0
    a1: float = 0.5
    b0: float = 1.0
    b1: float = 1.0
    c1: float = -0.5
    c2: float = 1.0
    d1: float = 1.0
    d2: float = 0.5
    sd_tgf: float = 0.5
    sd_cd8: float = 0.5
    sd_pdl1: float = 0.5
    sd_post: float = 0.5
    sd_growth: float = 1.0
    pdl1_cuts: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        probs = np.asarray(self.phenotype_probs, dtype=np.float64)
        if probs.shape != (3,) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("phenotype_probs must be three non-negative values summing to 1")
        if self.d2 <= 0:
            raise ValueError("d2 must be > 0")
        if min(self.sd_tgf, self.sd_cd8, self.sd_pdl1, self.sd_post, self.sd_growth) < 0:
            raise ValueError("noise sds must be >= 0")
        lo, hi = self.pdl1_cuts
        if not lo < hi:
            raise ValueError("pdl1_cuts must be increasing")

    def cate(self, X) -> np.ndarray:
        """``-d2 * c2 * M * 1{L_pre >= 1}`` from covariates ``(M, I, B, E_pre, L_pre)``."""
        X = np.asarray(X, dtype=np.float64)
        return -self.d2 * self.c2 * X[:, 0] * (X[:, 4] >= 1)


PDL1_COLUMNS = ("mutation", "phenotype", "tgf_beta", "cd8_pre", "pdl1_pre")


@dataclass(frozen=True)
class _Pdl1Draw:
    X: np.ndarray
    eps_post: np.ndarray
    eps_growth: np.ndarray


def _pdl1_exogenous(params: Pdl1Params, n: int, rng: np.random.Generator) -> _Pdl1Draw:
    I = rng.choice(3, size=n, p=np.asarray(params.phenotype_probs)).astype(np.float64)
    M = rng.lognormal(0.0, params.mutation_log_sd, n)
    B = params.a0 + params.a1 * I + params.sd_tgf * rng.standard_normal(n)
    E_pre = params.b0 + params.b1 * I + params.sd_cd8 * rng.standard_normal(n)
    latent = I + params.sd_pdl1 * rng.standard_normal(n)
    L_pre = np.searchsorted(np.asarray(params.pdl1_cuts), latent, side="right").astype(np.float64)
    X = np.column_stack([M, I, B, E_pre, L_pre])
    return _Pdl1Draw(X, params.sd_post * rng.standard_normal(n),
                     params.sd_growth * rng.standard_normal(n))


def _pdl1_outcome(params: Pdl1Params, draw: _Pdl1Draw, A) -> np.ndarray:
    M, B, E_pre, L_pre = draw.X[:, 0], draw.X[:, 2], draw.X[:, 3], draw.X[:, 4]
    L_post = np.maximum(L_pre - A, 0.0)
    E_post = E_pre + params.c1 * B + params.c2 * M * (L_pre - L_post) + draw.eps_post
    return params.d1 * M - params.d2 * E_post + draw.eps_growth


def gen_pdl1(params: Pdl1Params | None, n: int, seed: int,
             test_size: int = 5000) -> tuple[TrialDataset, EvaluationSet]:
    params = params if params is not None else Pdl1Params()
    if n < 1 or test_size < 1:
        raise ValueError("n and test_size must be >= 1")
    rng = np.random.default_rng(seed)
    draw = _pdl1_exogenous(params, n, rng)
    A = rng.binomial(1, 0.5, n).astype(np.float64)
    Y = _pdl1_outcome(params, draw, A)
    ev = _pdl1_exogenous(params, test_size, rng)
    zero = _Pdl1Draw(ev.X, np.zeros(test_size), np.zeros(test_size))
    mu0 = _pdl1_outcome(params, zero, np.zeros(test_size))
    tau = params.cate(ev.X)
    train = TrialDataset(draw.X, A, Y, id="pdl1", seed_provenance=seed, column_names=PDL1_COLUMNS)
    return train, EvaluationSet(ev.X, tau, mu0, mu0 + tau)


def pdl1_potential_outcomes(params: Pdl1Params | None, n: int, seed: int):
    """``(X, Y0, Y1)`` sharing every exogenous noise draw."""
    params = params if params is not None else Pdl1Params()
    draw = _pdl1_exogenous(params, n, np.random.default_rng(seed))
    return draw.X, _pdl1_outcome(params, draw, np.zeros(n)), _pdl1_outcome(params, draw, np.ones(n))


# ----------------------------------------------------------------- external


def load_external(path, n_train: int, seed: int,
                  noise_sd: float = 1.0) -> tuple[TrialDataset, EvaluationSet]:
    """Semi-synthetic trial from a CSV with a known ``tau`` column.

    ``n_train`` rows drawn uniformly without replacement form the training
    trial, with treatment re-drawn as Bernoulli(0.5) and, when ``mu0`` and
    ``mu1`` are present, outcomes re-drawn as ``mu_A + N(0, noise_sd^2)``.
    The remaining rows are the evaluation set.
    """
    path = Path(path)
    full, extras = read_csv(path)
    if "tau" not in extras:
        raise ValueError(f"{path}: missing required column 'tau'")
    if not 1 <= n_train < full.n:
        raise ValueError(f"n_train must lie in [1, {full.n})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(full.n)
    train_rows, eval_rows = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    A = rng.binomial(1, 0.5, n_train).astype(np.float64)
    has_mu = "mu0" in extras and "mu1" in extras
    if has_mu:
        mu_a = np.where(A == 1, extras["mu1"][train_rows], extras["mu0"][train_rows])
        Y = mu_a + noise_sd * rng.standard_normal(n_train)
    else:
        Y = full.outcome[train_rows]
    X = full.covariates
    train = TrialDataset(X[train_rows], A, Y, id=full.id, seed_provenance=seed,
                         column_names=full.column_names)
    tau = extras["tau"][eval_rows]
    mu0 = extras["mu0"][eval_rows] if has_mu else np.zeros(eval_rows.size)
    mu1 = extras["mu1"][eval_rows] if has_mu else mu0 + tau
    return train, EvaluationSet(X[eval_rows], tau, mu0, mu1)
