from dataclasses import replace

import numpy as np
import pytest

from spurious_pde.model import ModelConfig, alignments, grad, init_weights
from spurious_pde.optim import OptimizerState, gdm_step
from spurious_pde.pde import PdeConfig, expand_active_set, train_erm, train_pde, train_warmup
from spurious_pde.synthgen import (GROUPS, ConfigError, DataConfig, derive_seed, generate_dataset,
                                   paired_balanced_dataset, split_sets)


@pytest.fixture(scope="module")
def small_sets():
    return split_sets(DataConfig(N=1500, seed=2), n_val=600, n_test=1000)


SMALL = PdeConfig(T0=60, K=3, J_exp=20, m=40, eval_every=10)


@pytest.mark.parametrize("field,value", [("T0", 0), ("J_exp", 0), ("m", 0), ("K", -1), ("eta", 0.0),
                                         ("gamma", 1.5), ("expansion_strategy", "greedy"),
                                         ("ablation", "nope"), ("batch_size", -2)])
def test_config_validation(field, value):
    with pytest.raises(ConfigError, match=f"pde.{field}"):
        PdeConfig(**{field: value})


def test_warmup_single_step_is_one_gdm_step(small_sets):
    train = small_sets[0]
    W0 = init_weights(ModelConfig(seed=1))
    W, opt, _ = train_warmup(W0, train, PdeConfig(T0=1))
    expected, _ = gdm_step(W0, OptimizerState.zeros_like(W0, 0.3, 0.9), grad(W0, train))
    np.testing.assert_array_equal(W, expected)
    assert opt.step_count == 1


def test_warmup_on_twins_keeps_spurious_alignment_zero():
    twins = paired_balanced_dataset(DataConfig(noise_mode="orthogonalized"), 100, np.random.default_rng(0))
    W0 = init_weights(ModelConfig(seed=0))
    W0[:, 1] = 0.0
    W, _, traces = train_warmup(W0, twins, PdeConfig(T0=50, eval_every=10))
    assert np.all(W @ twins.basis.v_s == 0.0)
    assert all(t.max_align_spu == 0.0 for t in traces)


def test_expand_saturates():
    d = generate_dataset(DataConfig(N=13, alpha=0.6, seed=1))
    rng = np.random.default_rng(0)
    active = np.arange(10)
    grown = expand_active_set(active, d, 10, "uniform", rng)
    assert grown.size == 13
    assert expand_active_set(grown, d, 10, "uniform", rng).size == 13


@pytest.mark.parametrize("strategy", ["uniform", "stratified"])
def test_expand_adds_only_inactive(strategy):
    d = generate_dataset(DataConfig(N=400, seed=1))
    rng = np.random.default_rng(0)
    active = np.arange(0, 400, 7)
    grown = expand_active_set(active, d, 30, strategy, rng)
    added = grown[active.size:]
    assert added.size == 30
    assert not set(added.tolist()) & set(active.tolist())
    assert len(set(grown.tolist())) == grown.size


def test_stratified_takes_quarter_per_group_then_majority():
    d = generate_dataset(DataConfig(N=2000, seed=3))
    rng = np.random.default_rng(0)
    minority = np.concatenate([d.group_indices(1, -1), d.group_indices(-1, 1)])
    majority = np.setdiff1d(np.arange(d.N), minority)
    # minority exhausted -> everything from the majority groups
    active = np.concatenate([minority, majority[:100]])
    grown = expand_active_set(active, d, 40, "stratified", rng)
    assert np.all(np.isin(grown[active.size:], majority))
    # nothing exhausted -> ceil(m / 4) from each group
    grown = expand_active_set(np.array([], dtype=np.int64), d, 20, "stratified", rng)
    counts = d.subset(grown).group_counts()
    assert all(counts[g] == 5 for g in GROUPS)


def test_pde_schedule_and_traces(small_sets):
    train, val, test = small_sets
    res = train_pde(train, val, ModelConfig(seed=0), SMALL, testset=test)
    warm = res.active_set_history[0]
    assert res.active_set_history == [warm + k * 40 for k in range(4)]
    assert res.iterations == 60 + 3 * 20
    phases = {t.phase for t in res.traces}
    assert phases == {"warmup", "expansion_1", "expansion_2", "expansion_3"}
    iters = [t.iteration for t in res.traces]
    assert iters == sorted(iters) and iters[0] == 0
    best = max(t.val_wg_acc for t in res.traces)
    assert res.best_val_wg == best
    assert res.best_iteration == next(t.iteration for t in res.traces if t.val_wg_acc == best)


def test_pde_is_deterministic(small_sets):
    train, val, test = small_sets
    a = train_pde(train, val, ModelConfig(seed=0), SMALL, testset=test)
    b = train_pde(train, val, ModelConfig(seed=0), SMALL, testset=test)
    np.testing.assert_array_equal(a.final_W, b.final_W)
    assert a.traces == b.traces


def test_k_zero_is_subsample_baseline(small_sets):
    train, val, test = small_sets
    res = train_pde(train, val, ModelConfig(seed=0), replace(SMALL, K=0), testset=test)
    assert len(res.active_set_history) == 1
    assert res.iterations == 60
    assert {t.phase for t in res.traces} == {"warmup"}


def test_add_all_ablation_uses_everything(small_sets):
    train, val, test = small_sets
    res = train_pde(train, val, ModelConfig(seed=0), replace(SMALL, ablation="add_all_at_once"), testset=test)
    assert res.active_set_history[-1] == train.N
    assert res.iterations == 60 + 3 * 20


def test_reset_momentum_changes_trajectory(small_sets):
    train, val, test = small_sets
    keep = train_pde(train, val, ModelConfig(seed=0), SMALL, testset=test)
    reset = train_pde(train, val, ModelConfig(seed=0), replace(SMALL, ablation="reset_momentum_after_warmup"),
                      testset=test)
    n_warm = sum(t.phase == "warmup" for t in keep.traces)
    assert keep.traces[:n_warm] == reset.traces[:n_warm]
    assert not np.array_equal(keep.final_W, reset.final_W)


def test_minibatch_option_runs(small_sets):
    train, val, test = small_sets
    res = train_pde(train, val, ModelConfig(seed=0), replace(SMALL, batch_size=32), testset=test)
    assert res.iterations == 120


def test_validation_set_needs_all_groups(small_sets):
    train, val, _ = small_sets
    only_majority = val.subset(val.s1_indices)
    with pytest.raises(ValueError, match="validation set has no examples"):
        train_pde(train, only_majority, ModelConfig(), SMALL)


def test_erm_unknown_optimizer(small_sets):
    train, val, _ = small_sets
    with pytest.raises(ValueError, match="unknown optimizer"):
        train_erm(train, val, ModelConfig(), optimizer="adam")


# seeded runs on the full case-1 training set (tens of seconds)

@pytest.fixture(scope="module")
def case1_sets():
    return split_sets(DataConfig(seed=0), n_val=2000, n_test=10_000)


def test_warmup_learns_core_before_spurious(case1_sets):
    train, val, _ = case1_sets
    from spurious_pde.synthgen import subsample_group_balanced
    idx = subsample_group_balanced(train, np.random.default_rng(derive_seed(0, 3)))
    W, _, _ = train_warmup(init_weights(ModelConfig(seed=0)), train.subset(idx), PdeConfig(T0=800))
    al = alignments(W, train.basis)
    assert al.max_core > al.max_spurious


def test_erm_case1_learns_spurious_and_predicts_a(case1_sets):
    train, val, test = case1_sets
    res = train_erm(train, val, ModelConfig(seed=0), eta=0.1, iterations=1000, testset=test)
    al = alignments(res.final_W, train.basis)
    assert al.max_spurious >= 1 / train.config.beta_s
    assert al.max_core <= 10 * 0.13
    last = res.traces[-1]
    assert abs(last.overall_acc - 0.98) <= 0.02
    assert last.wg_acc <= 0.05


def test_erm_case2_learns_core():
    train, val, test = split_sets(DataConfig(beta_c=1.0, beta_s=0.2, seed=0), n_val=2000, n_test=5000)
    res = train_erm(train, val, ModelConfig(seed=0), eta=0.1, iterations=300, testset=test)
    core = [t.max_align_core for t in res.traces]
    assert max(core) >= 1 / train.config.beta_c
    assert res.traces[-1].wg_acc >= 0.9
