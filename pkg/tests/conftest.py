import numpy as np
import pytest

from spurious_pde.synthgen import (ROLE_CORE, ROLE_NOISE, ROLE_SPURIOUS, DataConfig, Dataset,
                                   generate_dataset, make_basis)

HAND_W = np.array([[0.3, -0.2, 0.5, 0.1], [-0.4, 0.25, 0.05, -0.3]])


def hand_instance() -> tuple[np.ndarray, Dataset]:
    """J=2, d=4, N=3 instance with exact decimal entries (mirrored in scripts/derive_frozen_values.py)."""
    X = np.array([
        [[0.2, 0, 0, 0], [0, 1, 0, 0], [0.1, -0.3, 0.2, 0.4]],
        [[-0.2, 0, 0, 0], [0, 1, 0, 0], [0.5, 0.1, -0.2, 0.3]],
        [[0.2, 0, 0, 0], [0, -1, 0, 0], [-0.1, 0.2, 0.6, -0.5]],
    ])
    y = np.array([1, -1, 1])
    a = np.array([1, 1, -1])
    roles = np.tile([ROLE_CORE, ROLE_SPURIOUS, ROLE_NOISE], (3, 1))
    cfg = DataConfig(d=4, P=3, N=3, alpha=0.75, beta_c=0.2, beta_s=1.0, shuffle_patches=False)
    return HAND_W.copy(), Dataset(cfg, make_basis(4), X, y, a, roles)


@pytest.fixture
def hand():
    return hand_instance()


@pytest.fixture(scope="session")
def case1_small():
    return generate_dataset(DataConfig(N=2000, seed=3))


@pytest.fixture(scope="session")
def case1_full():
    return generate_dataset(DataConfig(seed=0))
