import numpy as np
import pytest

from spurious_pde.optim import OptimizerState, gd_step, gdm_step, reset_momentum


@pytest.fixture
def G():
    return np.random.default_rng(0).normal(size=(3, 4))


def test_gd_fixed_point_and_linearity(G):
    W = np.random.default_rng(1).normal(size=(3, 4))
    np.testing.assert_array_equal(gd_step(W, np.zeros_like(W), 0.1), W)
    np.testing.assert_array_equal(gd_step(np.zeros_like(G), G, 0.1), -0.1 * G)


def test_gd_rejects_bad_inputs(G):
    with pytest.raises(ValueError):
        gd_step(G, G, 0.0)
    with pytest.raises(ValueError, match="shape mismatch"):
        gd_step(G, G[:2], 0.1)


def test_gdm_gamma_zero_bit_identical_to_gd(G):
    W = np.random.default_rng(1).normal(size=(3, 4))
    W1, st = gdm_step(W, OptimizerState.zeros_like(W, 0.1, 0.0), G)
    np.testing.assert_array_equal(W1, gd_step(W, G, 0.1))
    np.testing.assert_array_equal(st.g, G)


def test_gdm_gamma_one_never_moves(G):
    W = np.ones((3, 4))
    st = OptimizerState.zeros_like(W, 0.5, 1.0)
    for _ in range(5):
        W, st = gdm_step(W, st, G)
    np.testing.assert_array_equal(W, np.ones((3, 4)))


def test_gdm_one_step_arithmetic(G):
    W = np.zeros((3, 4))
    W1, st = gdm_step(W, OptimizerState.zeros_like(W, 0.3, 0.9), G)
    np.testing.assert_allclose(st.g, 0.1 * G, rtol=1e-15)
    np.testing.assert_allclose(W1, -0.1 * 0.3 * G, rtol=1e-15)
    assert st.step_count == 1


def test_buffer_geometric_series(G):
    W = np.zeros((3, 4))
    st = OptimizerState.zeros_like(W, 0.01, 0.9)
    for t in range(1, 21):
        W, st = gdm_step(W, st, G)
        np.testing.assert_allclose(st.g, (1 - 0.9 ** t) * G, rtol=0, atol=1e-12)


def test_none_buffer_treated_as_zero(G):
    W = np.zeros((3, 4))
    a, _ = gdm_step(W, OptimizerState(0.2, 0.5), G)
    b, _ = gdm_step(W, OptimizerState.zeros_like(W, 0.2, 0.5), G)
    np.testing.assert_array_equal(a, b)


def test_reset_matches_fresh_buffer_and_is_idempotent(G):
    W = np.zeros((3, 4))
    _, st = gdm_step(W, OptimizerState.zeros_like(W, 0.2, 0.9), G)
    r = reset_momentum(st)
    assert np.all(r.g == 0) and r.eta == 0.2 and r.gamma == 0.9
    np.testing.assert_array_equal(reset_momentum(r).g, r.g)
    a, _ = gdm_step(W, r, G)
    b, _ = gdm_step(W, OptimizerState.zeros_like(W, 0.2, 0.9), G)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("eta,gamma", [(0.0, 0.5), (-1.0, 0.5), (0.1, -0.1), (0.1, 1.5)])
def test_state_validation(eta, gamma):
    with pytest.raises(ValueError):
        OptimizerState(eta, gamma)
