import math

import numpy as np
import pytest

from spurious_pde.model import (ModelConfig, alignments, batch_loss, ell_weights, forward, grad, init_weights,
                                logistic_loss, logistic_loss_derivative, scores)
from spurious_pde.oracle import finite_diff_grad
from spurious_pde.synthgen import ConfigError, DataConfig, Example, generate_dataset

import frozen


def test_init_rejects_nonpositive_sigma():
    with pytest.raises(ConfigError, match="model.sigma_0"):
        ModelConfig(sigma_0=0.0)


def test_init_std_and_determinism():
    cfg = ModelConfig(J=40, d=50, sigma_0=0.13, seed=1)
    W = init_weights(cfg)
    assert W.shape == (40, 50)
    assert abs(W.std() - 0.13) <= 0.15 * 0.13
    np.testing.assert_array_equal(W, init_weights(cfg))


def test_forward_zero_weights():
    assert forward(np.zeros((3, 4)), np.ones((3, 4))) == 0.0


def test_forward_direct_arithmetic():
    W = np.zeros((1, 5))
    W[0, 0] = 1.0
    patches = np.zeros((3, 5))
    patches[0, 0] = 2.0
    assert forward(W, Example(patches, 1, 1)) == 8.0


def test_forward_odd():
    rng = np.random.default_rng(0)
    W, x = rng.normal(size=(4, 6)), rng.normal(size=(3, 6))
    assert forward(W, -x) == pytest.approx(-forward(W, x), rel=1e-14)


def test_forward_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        forward(np.zeros((2, 4)), np.zeros((3, 5)))


def test_logistic_loss_values():
    assert logistic_loss(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert logistic_loss(800.0) == 0.0
    assert abs(logistic_loss(-50.0) - 50.0) <= 1e-9


@pytest.mark.parametrize("z", [-2.0, 0.0, 3.0])
def test_logistic_derivative_matches_central_difference(z):
    h = 1e-5
    fd = (logistic_loss(z + h) - logistic_loss(z - h)) / (2 * h)
    assert abs(logistic_loss_derivative(z) - fd) <= 1e-8


def test_hand_instance_matches_decimal_oracle(hand):
    W, data = hand
    np.testing.assert_allclose(scores(W, data), frozen.HAND_SCORES, rtol=1e-13)
    np.testing.assert_allclose(ell_weights(W, data), frozen.HAND_ELL, rtol=1e-14)
    assert batch_loss(W, data) == pytest.approx(frozen.HAND_LOSS, rel=1e-14)
    np.testing.assert_allclose(grad(W, data), frozen.HAND_GRAD, rtol=1e-12)


def test_zero_weights(hand):
    _, data = hand
    W = np.zeros((2, 4))
    assert batch_loss(W, data) == math.log(2)
    np.testing.assert_array_equal(ell_weights(W, data), 0.5)
    assert np.all(grad(W, data) == 0.0)


def test_empty_slice_errors(hand):
    W, data = hand
    empty = data.subset([])
    for fn in (batch_loss, ell_weights, grad):
        with pytest.raises(ValueError, match="empty"):
            fn(W, empty)


def test_grad_matches_finite_differences_on_small_draw():
    data = generate_dataset(DataConfig(d=6, N=8, seed=2))
    W = init_weights(ModelConfig(J=3, d=6, sigma_0=0.8, seed=2))
    np.testing.assert_allclose(grad(W, data), finite_diff_grad(W, data), rtol=1e-6, atol=1e-10)


def test_core_projection_of_gradient_orthogonalized():
    data = generate_dataset(DataConfig(d=20, N=300, seed=1, noise_mode="orthogonalized"))
    W = init_weights(ModelConfig(J=4, d=20, sigma_0=0.3, seed=1))
    cfg = data.config
    ell = ell_weights(W, data)
    c = W @ data.basis.v_c
    expected = -3 * cfg.beta_c ** 3 / data.N * ell.sum() * c ** 2
    got = grad(W, data) @ data.basis.v_c
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_alignments():
    W = np.zeros((3, 5))
    W[1] = 2 * np.eye(5)[1]
    from spurious_pde.synthgen import make_basis
    al = alignments(W, make_basis(5))
    assert al.max_spurious == 2.0
    W2 = np.random.default_rng(0).normal(size=(3, 5))
    al2 = alignments(W2, make_basis(5))
    np.testing.assert_array_equal(al2.core, W2[:, 0])
    np.testing.assert_array_equal(al2.spurious, W2[:, 1])


def test_loss_decreases_over_first_50_gd_steps(case1_small):
    W = init_weights(ModelConfig(seed=0))
    losses = []
    for _ in range(51):
        losses.append(batch_loss(W, case1_small))
        W = W - 0.1 * grad(W, case1_small)
    upticks = int(np.sum(np.diff(losses) > 0))
    assert upticks <= 2
    assert losses[-1] < losses[0]
