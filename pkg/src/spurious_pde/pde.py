"""Training loops: ERM, and progressive data expansion (warm-up on a group-balanced
subset, then growing the training set a few examples at a time while the momentum
buffer carries over).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import metrics
from .model import ModelConfig, alignments, batch_loss, grad, init_weights
from .optim import OptimizerState, gd_step, gdm_step, reset_momentum
from .synthgen import GROUPS, ConfigError, Dataset, derive_seed, subsample_group_balanced

Strategy = Literal["stratified", "uniform"]
Ablation = Literal["none", "add_all_at_once", "reset_momentum_after_warmup"]


@dataclass(frozen=True)
class PdeConfig:
    T0: int = 800
    K: int = 20
    J_exp: int = 100
    m: int = 50
    eta: float = 0.3
    gamma: float = 0.9
    eval_every: int = 25
    expansion_strategy: Strategy = "stratified"
    ablation: Ablation = "none"
    batch_size: int = 0  # 0 means full batch
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self, prefix: str = "pde") -> None:
        for name in ("T0", "J_exp", "m", "eval_every"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{prefix}.{name}: must be a positive integer, got {v!r}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 0:
            raise ConfigError(f"{prefix}.batch_size: must be a non-negative integer, got {self.batch_size!r}")
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError(f"{prefix}.K: must be a non-negative integer, got {self.K!r}")
        if not self.eta > 0:
            raise ConfigError(f"{prefix}.eta: must be > 0, got {self.eta!r}")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"{prefix}.gamma: must be in [0, 1], got {self.gamma!r}")
        if self.expansion_strategy not in ("stratified", "uniform"):
            raise ConfigError(f"{prefix}.expansion_strategy: expected 'stratified' or 'uniform', "
                              f"got {self.expansion_strategy!r}")
        if self.ablation not in ("none", "add_all_at_once", "reset_momentum_after_warmup"):
            raise ConfigError(f"{prefix}.ablation: unknown ablation {self.ablation!r}")


@dataclass
class TrainResult:
    best_W: np.ndarray
    best_iteration: int
    best_val_wg: float
    final_W: np.ndarray
    traces: list[metrics.TraceRecord]
    active_set_history: list[int] = field(default_factory=list)
    opt_state: OptimizerState | None = None

    @property
    def iterations(self) -> int:
        return self.traces[-1].iteration if self.traces else 0


class _Run:
    """Shared bookkeeping: iteration counter, traces and validation-based selection."""

    def __init__(self, W: np.ndarray, opt: OptimizerState, valset: Dataset | None,
                 evalset: Dataset | None, eval_every: int, use_momentum: bool = True,
                 batch_size: int = 0, rng: np.random.Generator | None = None):
        self.W = W
        self.opt = opt
        self.valset = valset
        self.evalset = evalset
        self.eval_every = eval_every
        self.use_momentum = use_momentum
        self.batch_size = batch_size
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.t = 0
        self.traces: list[metrics.TraceRecord] = []
        self.best = (-math.inf, 0, W.copy())

    def observe(self, phase: str, active: Dataset) -> None:
        data = self.evalset if self.evalset is not None else active
        W = self.W
        al = alignments(W, data.basis)
        if _has_all_groups(data):
            overall, wg, _ = metrics.accuracy_report(W, data)
        else:
            overall, wg = metrics.overall_accuracy(W, data), math.nan
        val_wg = math.nan
        if self.valset is not None:
            val_wg, _ = metrics.worst_group_accuracy(W, self.valset)
            # strict > keeps the earliest iterate on ties
            if val_wg > self.best[0]:
                self.best = (val_wg, self.t, W.copy())
        cfg = data.config
        self.traces.append(metrics.TraceRecord(
            iteration=self.t,
            phase=phase,
            active_set_size=active.N,
            train_loss=batch_loss(W, active),
            max_align_core=al.max_core,
            max_align_spu=al.max_spurious,
            overall_acc=overall,
            wg_acc=wg,
            val_wg_acc=val_wg,
            g1=metrics.g1_value(W, data.basis, cfg.beta_c, cfg.beta_s),
            spurious_coeff=metrics.spurious_coefficient(W, active),
        ))

    def train(self, active: Dataset, steps: int, phase: str) -> None:
        if active.N == 0:
            raise ValueError("cannot train on an empty set")
        for _ in range(steps):
            if 0 < self.batch_size < active.N:
                batch = active.subset(self.rng.choice(active.N, size=self.batch_size, replace=False))
            else:
                batch = active
            G = grad(self.W, batch)
            if self.use_momentum:
                self.W, self.opt = gdm_step(self.W, self.opt, G)
            else:
                self.W = gd_step(self.W, G, self.opt.eta)
                self.opt.step_count += 1
            self.t += 1
            if self.t % self.eval_every == 0:
                self.observe(phase, active)
        if not self.traces or self.traces[-1].iteration != self.t:
            self.observe(phase, active)

    def result(self, history: list[int]) -> TrainResult:
        best_val, best_t, best_W = self.best
        return TrainResult(best_W, best_t, best_val, self.W.copy(), self.traces, history, self.opt)


def _has_all_groups(data: Dataset) -> bool:
    return all(v > 0 for v in data.group_counts().values())


def _require_groups(valset: Dataset) -> None:
    missing = [g for g, n in valset.group_counts().items() if n == 0]
    if missing:
        names = ", ".join(metrics.group_label(g) for g in missing)
        raise ValueError(f"validation set has no examples in group(s) {names}; worst-group accuracy undefined")


def train_warmup(W0: np.ndarray, warmup_set: Dataset, config: PdeConfig,
                 valset: Dataset | None = None, evalset: Dataset | None = None):
    """T0 full-batch GD+M steps on the balanced warm-up set.

    Returns ``(W, opt_state, traces)``; the momentum buffer is handed on to the
    expansion stage.
    """
    if warmup_set.N == 0:
        raise ValueError("warm-up set is empty")
    run = _Run(W0.copy(), OptimizerState.zeros_like(W0, config.eta, config.gamma), valset, evalset,
               config.eval_every)
    run.observe("warmup", warmup_set)
    run.train(warmup_set, config.T0, "warmup")
    return run.W, run.opt, run.traces


def expand_active_set(active: np.ndarray, dataset: Dataset, m: int, strategy: Strategy,
                      rng: np.random.Generator) -> np.ndarray:
    """Add ``min(m, remaining)`` inactive indices; returns the grown index array.

    ``stratified`` takes up to ceil(m/4) from each (y, a) group, then fills any
    shortfall uniformly from what is left (in practice the majority groups once
    the minority groups are used up).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    inactive = np.ones(dataset.N, dtype=bool)
    inactive[active] = False
    remaining = np.flatnonzero(inactive)
    n_add = min(m, remaining.size)
    if n_add == 0:
        return active.copy()
    if strategy == "uniform":
        added = rng.choice(remaining, size=n_add, replace=False)
    elif strategy == "stratified":
        per_group = math.ceil(m / 4)
        picks = []
        need = n_add
        for y, a in GROUPS:
            pool = remaining[(dataset.y[remaining] == y) & (dataset.a[remaining] == a)]
            take = min(per_group, pool.size, need)
            if take:
                picks.append(rng.choice(pool, size=take, replace=False))
                need -= take
        if need:
            taken = np.concatenate(picks) if picks else np.empty(0, dtype=np.int64)
            rest = np.setdiff1d(remaining, taken)
            picks.append(rng.choice(rest, size=need, replace=False))
        added = np.concatenate(picks)
    else:
        raise ValueError(f"unknown expansion strategy {strategy!r}")
    return np.concatenate([active, np.sort(added)])


def train_pde(dataset: Dataset, valset: Dataset, model_config: ModelConfig, config: PdeConfig,
              testset: Dataset | None = None, W0: np.ndarray | None = None) -> TrainResult:
    """Warm-up on a balanced subsample, then ``K`` expansion rounds of ``J_exp`` steps.

    The returned ``best_W`` maximizes validation worst-group accuracy over all
    evaluated iterates (earliest wins ties). Trace accuracies are measured on
    ``testset`` when given, otherwise on the full training set.
    """
    _require_groups(valset)
    rng = np.random.default_rng(derive_seed(config.seed, 3))
    W = init_weights(model_config) if W0 is None else W0.copy()
    active = subsample_group_balanced(dataset, rng)
    evalset = testset if testset is not None else dataset

    run = _Run(W, OptimizerState.zeros_like(W, config.eta, config.gamma), valset, evalset, config.eval_every,
               batch_size=config.batch_size, rng=rng)
    warm = dataset.subset(active)
    run.observe("warmup", warm)
    run.train(warm, config.T0, "warmup")
    history = [active.size]

    if config.ablation == "reset_momentum_after_warmup":
        run.opt = reset_momentum(run.opt)

    if config.K > 0:
        if config.ablation == "add_all_at_once":
            schedule = [(dataset.N, config.K * config.J_exp)]
        else:
            schedule = [(config.m, config.J_exp)] * config.K
        for k, (m, steps) in enumerate(schedule, start=1):
            active = expand_active_set(active, dataset, m, config.expansion_strategy, rng)
            history.append(active.size)
            run.train(dataset.subset(active), steps, f"expansion_{k}")
    return run.result(history)


def train_erm(dataset: Dataset, valset: Dataset, model_config: ModelConfig,
              optimizer: Literal["gd", "gdm"] = "gd", eta: float = 0.1, gamma: float = 0.0,
              iterations: int = 1000, eval_every: int = 25, testset: Dataset | None = None,
              W0: np.ndarray | None = None, batch_size: int = 0, seed: int = 0) -> TrainResult:
    """Plain full-batch training on the whole set with GD or GD+M."""
    if optimizer not in ("gd", "gdm"):
        raise ValueError(f"unknown optimizer {optimizer!r}; expected 'gd' or 'gdm'")
    _require_groups(valset)
    W = init_weights(model_config) if W0 is None else W0.copy()
    evalset = testset if testset is not None else dataset
    opt = OptimizerState.zeros_like(W, eta, gamma if optimizer == "gdm" else 0.0)
    run = _Run(W, opt, valset, evalset, eval_every, use_momentum=optimizer == "gdm",
               batch_size=batch_size, rng=np.random.default_rng(derive_seed(seed, 4)))
    run.observe("erm", dataset)
    run.train(dataset, iterations, "erm")
    return run.result([dataset.N])
