"""Benchmark configuration loaded from TOML."""
from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..dgp import PRESETS, Pdl1Params, load_preset
from ..zoo import MODEL_LABELS

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    pass


GENERATORS = ("linear", "pdl1", "external")


@dataclass(frozen=True)
class ScenarioEntry:
    name: str
    generator: str
    preset: str | None = None
    path: str | None = None
    params: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        if self.generator == "linear":
            return load_preset(self.preset).p
        if self.generator == "pdl1":
            return 5
        with open(self.path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        return sum(1 for h in header if h.startswith("x") and h[1:].isdigit())


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple[ScenarioEntry, ...]
    n_grid: tuple[int, ...] = (100, 250, 500, 750)
    replicates: int = 50
    test_size: int = 5000
    models: tuple[str, ...] = ()
    master_seed: int = 0
    workers: int = 1
    subgroup_direction: str = "lower"

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ConfigError("scenario names must be unique")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.n_grid or min(self.n_grid) < 50:
            raise ConfigError("every n in n_grid must be >= 50")
        if self.test_size < 1:
            raise ConfigError("test_size must be >= 1")
        if not self.models:
            raise ConfigError("at least one model is required")
        unknown = [m for m in self.models if m not in MODEL_LABELS]
        if unknown:
            raise ConfigError(f"unknown model labels {unknown}; known: {list(MODEL_LABELS)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model labels")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.subgroup_direction not in ("lower", "both"):
            raise ConfigError("subgroup_direction must be 'lower' or 'both'")

    def seed_for(self, scenario: str, n: int, replicate: int) -> int:
        return derive_seed(self.master_seed, scenario, n, replicate)


def derive_seed(master_seed: int, scenario: str, n: int, replicate: int) -> int:
    """Stable 63-bit seed, independent of execution order and Python's hash salt."""
    key = f"{master_seed}|{scenario}|{n}|{replicate}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") >> 1


def _scenario(d: dict, base: Path) -> ScenarioEntry:
    gen = d.get("generator", "linear")
    if gen not in GENERATORS:
        raise ConfigError(f"unknown generator {gen!r}")
    if gen == "linear":
        preset = d.get("preset")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")
        return ScenarioEntry(d.get("name", preset), gen, preset=preset)
    if gen == "pdl1":
        params = dict(d.get("params", {}))
        try:
            Pdl1Params(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid PD-L1 parameters: {exc}") from None
        return ScenarioEntry(d.get("name", "pdl1"), gen, params=params)
    path = d.get("path")
    if not path:
        raise ConfigError("external scenarios need a 'path'")
    path = Path(path)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"external data file not found: {path}")
    return ScenarioEntry(d.get("name", path.stem), gen, path=str(path))


def config_from_dict(d: dict, base: Path = Path(".")) -> BenchConfig:
    try:
        scenarios = tuple(_scenario(s, base) for s in d.get("scenarios", []))
        return BenchConfig(
            scenarios=scenarios,
            n_grid=tuple(int(n) for n in d.get("n_grid", (100, 250, 500, 750))),
            replicates=int(d.get("replicates", 50)),
            test_size=int(d.get("test_size", 5000)),
            models=tuple(str(m) for m in d.get("models", ())),
            master_seed=int(d.get("master_seed", 0)),
            workers=int(d.get("workers", 1)),
            subgroup_direction=str(d.get("subgroup_direction", "lower")),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def load_config(path) -> BenchConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return config_from_dict(raw, path.parent)
