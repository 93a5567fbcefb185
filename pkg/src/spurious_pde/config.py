"""Experiment configuration: one JSON object, strictly validated.

Schema (every section and field is optional; omitted values take the defaults
below, which are the case-1 experiment settings)::

    {
      "data":    {"d": 50, "P": 3, "alpha": 0.98, "beta_c": 0.2, "beta_s": 1.0,
                  "sigma_p": 0.78, "N": 10000, "seed": 0, "noise_mode": "raw",
                  "shuffle_patches": true},
      "basis":   "canonical",                 # or "random_rotation"
      "n_val":   2000,
      "n_test":  10000,
      "model":   {"J": 40, "sigma_0": 0.13, "seed": 0},   # "d" allowed if equal to data.d
      "pde":     {"T0": 800, "K": 20, "J_exp": 100, "m": 50, "eta": 0.3, "gamma": 0.9,
                  "eval_every": 25, "expansion_strategy": "stratified",
                  "ablation": "none", "batch_size": 0, "seed": 0},
      "erm_gd":  {"eta": 0.1, "gamma": 0.0, "iterations": 1000, "eval_every": 25, "batch_size": 0},
      "erm_gdm": {"eta": 0.3, "gamma": 0.9, "iterations": 1000, "eval_every": 25, "batch_size": 0},
      "dataset": null                         # optional path to a dataset written by `generate`
    }

Unknown keys and wrongly typed values raise :class:`ConfigError` naming the
field path, e.g. ``pde.J_exp: expected int, got str``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .model import ModelConfig
from .pde import PdeConfig
from .synthgen import ConfigError, DataConfig


@dataclass(frozen=True)
class ErmConfig:
    eta: float = 0.1
    gamma: float = 0.0
    iterations: int = 1000
    eval_every: int = 25
    batch_size: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self, prefix: str = "erm") -> None:
        if not self.eta > 0:
            raise ConfigError(f"{prefix}.eta: must be > 0, got {self.eta!r}")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"{prefix}.gamma: must be in [0, 1], got {self.gamma!r}")
        for name in ("iterations", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{prefix}.{name}: must be >= 1, got {getattr(self, name)!r}")
        if self.batch_size < 0:
            raise ConfigError(f"{prefix}.batch_size: must be >= 0, got {self.batch_size!r}")


@dataclass(frozen=True)
class ModelSection:
    J: int = 40
    sigma_0: float = 0.13
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    basis: str = "canonical"
    n_val: int = 2000
    n_test: int = 10_000
    model: ModelSection = field(default_factory=ModelSection)
    pde: PdeConfig = field(default_factory=PdeConfig)
    erm_gd: ErmConfig = field(default_factory=ErmConfig)
    erm_gdm: ErmConfig = field(default_factory=lambda: ErmConfig(eta=0.3, gamma=0.9))
    dataset: str | None = None

    def __post_init__(self):
        if self.basis not in ("canonical", "random_rotation"):
            raise ConfigError(f"basis: expected 'canonical' or 'random_rotation', got {self.basis!r}")
        for name in ("n_val", "n_test"):
            if getattr(self, name) < 4:
                raise ConfigError(f"{name}: need at least 4 examples, got {getattr(self, name)!r}")

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(J=self.model.J, d=self.data.d, sigma_0=self.model.sigma_0, seed=self.model.seed)

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Same experiment with every seed (data, init, expansion order) set to ``seed``."""
        return replace(self, data=replace(self.data, seed=seed), model=replace(self.model, seed=seed),
                       pde=replace(self.pde, seed=seed))

    def to_dict(self) -> dict:
        return asdict(self)


def _check_type(path: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
        want = "bool"
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
        want = "int"
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        want = "number"
        if ok:
            value = float(value)
    elif isinstance(default, str):
        ok = isinstance(value, str)
        want = "string"
    else:
        return value
    if not ok:
        raise ConfigError(f"{path}: expected {want}, got {type(value).__name__} {value!r}")
    return value


def _build(cls, raw, path: str, base=None):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
    base = base if base is not None else cls()
    kwargs = {k: _check_type(f"{path}.{k}", v, getattr(base, k)) for k, v in raw.items()}
    try:
        obj = replace(base, **kwargs)
    except ConfigError as exc:
        msg = str(exc)
        # section validators prefix with their own default name; rewrite to the real path
        head, _, tail = msg.partition(".")
        raise ConfigError(f"{path}.{tail}" if tail else msg) from None
    validate = getattr(obj, "validate", None)
    if validate is not None:
        validate(path)
    return obj


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"<root>: expected an object, got {type(raw).__name__}")
    top = {f.name for f in fields(ExperimentConfig)}
    for key in raw:
        if key not in top:
            raise ConfigError(f"{key}: unknown field")
    base = ExperimentConfig()
    kw = {}
    if "data" in raw:
        kw["data"] = _build(DataConfig, raw["data"], "data")
    model_raw = dict(raw.get("model", {})) if isinstance(raw.get("model", {}), dict) else raw["model"]
    if isinstance(model_raw, dict) and "d" in model_raw:
        d = model_raw.pop("d")
        data_d = kw.get("data", base.data).d
        if d != data_d:
            raise ConfigError(f"model.d: must equal data.d ({data_d}), got {d!r}")
    if "model" in raw:
        kw["model"] = _build(ModelSection, model_raw, "model")
        ModelConfig(kw["model"].J, kw.get("data", base.data).d, kw["model"].sigma_0, kw["model"].seed)
    if "pde" in raw:
        kw["pde"] = _build(PdeConfig, raw["pde"], "pde")
    for name in ("erm_gd", "erm_gdm"):
        if name in raw:
            kw[name] = _build(ErmConfig, raw[name], name, base=getattr(base, name))
    for name in ("basis", "n_val", "n_test"):
        if name in raw:
            kw[name] = _check_type(name, raw[name], getattr(base, name))
    if "dataset" in raw:
        if raw["dataset"] is not None and not isinstance(raw["dataset"], str):
            raise ConfigError(f"dataset: expected a path string or null, got {raw['dataset']!r}")
        kw["dataset"] = raw["dataset"]
    return replace(base, **kw)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc})") from None
    return parse_config(raw)
