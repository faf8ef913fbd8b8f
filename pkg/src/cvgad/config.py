"""Run configuration: hyperparameters, injection settings and dataset presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from cvgad.errors import ConfigError

ABLATION_MODES = ("full", "sim", "gcn", "ore", "bano", "bcla", "ocla", "con")


@dataclass
class Hyperparams:
    d: int = 64
    N: int = 4
    lr: float = 0.001
    alpha: float = 0.8
    beta: float = 0.6
    gamma: float = 0.8
    epochs: int = 500  # total purification-phase epochs, split evenly over iterations
    iterations: int = 5
    refine_epochs: int = 200
    K: float = 0.01
    rounds: int = 300
    restart_p: float = 0.5
    batch_size: int = 300
    num_layers: int = 1
    bias: bool = True
    feature_norm: str = "row"
    eps: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("alpha", "beta", "gamma", "K"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        for name in ("d", "N", "rounds", "batch_size", "num_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("epochs", "iterations", "refine_epochs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.iterations and self.epochs % self.iterations:
            raise ConfigError("epochs must be divisible by iterations")
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        if not 0.0 < self.restart_p < 1.0:
            raise ConfigError("restart_p must lie in (0, 1)")
        if self.feature_norm not in ("row", "none"):
            raise ConfigError(f"feature_norm must be 'row' or 'none', got {self.feature_norm!r}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 for negative pairing")

    @property
    def epochs_per_iteration(self) -> int:
        return self.epochs // self.iterations if self.iterations else 0

    def replace(self, **kw) -> "Hyperparams":
        return dataclasses.replace(self, **kw)


@dataclass
class InjectionConfig:
    clique_size: int = 15
    clique_count: int = 5
    contextual_count: int | None = None  # None -> clique_size * clique_count
    candidate_pool_size: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.clique_size < 2:
            raise ConfigError("clique_size must be >= 2")
        if self.clique_count < 0:
            raise ConfigError("clique_count must be >= 0")
        if self.contextual_count is not None and self.contextual_count < 0:
            raise ConfigError("contextual_count must be >= 0")
        if self.candidate_pool_size < 1:
            raise ConfigError("candidate_pool_size must be >= 1")

    @property
    def n_contextual(self) -> int:
        if self.contextual_count is None:
            return self.clique_size * self.clique_count
        return self.contextual_count


# per-dataset schedules; anything not listed falls back to Hyperparams defaults
DATASET_PRESETS: dict[str, dict] = {
    "cora": dict(alpha=0.8, epochs=500, refine_epochs=200, K=0.01),
    "citeseer": dict(alpha=0.4, epochs=500, refine_epochs=200, K=0.01),
    "pubmed": dict(alpha=0.4, epochs=500, refine_epochs=200, K=0.01),
    "citation": dict(alpha=0.4, epochs=1000, refine_epochs=400, K=0.01),
    "acm": dict(alpha=0.6, epochs=1000, refine_epochs=400, K=0.015),
}

INJECTION_PRESETS: dict[str, dict] = {
    "cora": dict(clique_count=5),
    "citeseer": dict(clique_count=5),
    "pubmed": dict(clique_count=20),
}


@dataclass
class RunConfig:
    data: str = ""
    dataset: str = ""
    out: str = "runs/out"
    mode: str = "full"
    seed: int = 0
    threads: int = 0
    force: bool = False
    modes: list = field(default_factory=lambda: ["full", "ore", "sim"])
    seeds: list = field(default_factory=list)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    injection: InjectionConfig = field(default_factory=InjectionConfig)

    def __post_init__(self):
        check_mode(self.mode)
        for m in self.modes:
            check_mode(m)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check_mode(mode: str) -> str:
    if mode not in ABLATION_MODES:
        raise ConfigError(f"unknown ablation mode {mode!r}; expected one of {ABLATION_MODES}")
    return mode


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def resolve_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Merge dataset presets, a parsed config mapping and flag overrides.

    ``raw`` has top-level run keys plus optional ``hyper`` and ``injection``
    tables. ``overrides`` uses the same layout and wins over ``raw``.
    """
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in (raw or {}).items()}
    for key, val in (overrides or {}).items():
        if isinstance(val, dict):
            raw.setdefault(key, {}).update(val)
        else:
            raw[key] = val
    hyper_raw = raw.pop("hyper", {}) or {}
    inj_raw = raw.pop("injection", {}) or {}
    dataset = str(raw.get("dataset", "")).lower()
    hyper_vals = {**DATASET_PRESETS.get(dataset, {}), **hyper_raw}
    inj_vals = {**INJECTION_PRESETS.get(dataset, {}), **inj_raw}
    if "seed" in raw:
        hyper_vals.setdefault("seed", raw["seed"])
        inj_vals.setdefault("seed", raw["seed"])
    hyper = _build(Hyperparams, hyper_vals, "hyper")
    injection = _build(InjectionConfig, inj_vals, "injection")
    return _build(RunConfig, {**raw, "hyper": hyper, "injection": injection}, "run")


def load_config_file(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
