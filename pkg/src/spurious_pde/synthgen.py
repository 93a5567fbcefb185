"""Synthetic data with a core feature, a spurious feature and Gaussian noise patches.

Each example is a stack of ``P`` patches in ``R^d``: one patch ``beta_c * y * v_c``,
one patch ``beta_s * a * v_s`` and ``P - 2`` noise draws from ``N(0, sigma_p^2 / d I)``.
The spurious label ``a`` agrees with ``y`` with probability ``alpha``.
"""
from __future__ import annotations

from numbers import Integral
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

ROLE_CORE = 0
ROLE_SPURIOUS = 1
ROLE_NOISE = 2

GROUPS: tuple[tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))

NoiseMode = Literal["raw", "orthogonalized"]


class ConfigError(ValueError):
    """Invalid configuration value; message starts with the offending field path."""


@dataclass(frozen=True)
class DataConfig:
    d: int = 50
    P: int = 3
    alpha: float = 0.98
    beta_c: float = 0.2
    beta_s: float = 1.0
    sigma_p: float = 0.78
    N: int = 10_000
    seed: int = 0
    noise_mode: NoiseMode = "raw"
    shuffle_patches: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self, prefix: str = "data") -> None:
        if not isinstance(self.d, Integral) or self.d < 2:
            raise ConfigError(f"{prefix}.d: dimension must be an integer >= 2, got {self.d!r}")
        if not isinstance(self.P, Integral) or self.P < 3:
            raise ConfigError(f"{prefix}.P: need at least 3 patches, got {self.P!r}")
        if not 0.5 < self.alpha <= 1.0:
            raise ConfigError(f"{prefix}.alpha: must satisfy 0.5 < alpha <= 1, got {self.alpha!r}")
        # beta_c = 0 is allowed for degenerate unit checks; negative never
        if self.beta_c < 0:
            raise ConfigError(f"{prefix}.beta_c: must be >= 0, got {self.beta_c!r}")
        if self.beta_s <= 0:
            raise ConfigError(f"{prefix}.beta_s: must be > 0, got {self.beta_s!r}")
        if self.sigma_p <= 0:
            raise ConfigError(f"{prefix}.sigma_p: must be > 0, got {self.sigma_p!r}")
        if not isinstance(self.N, Integral) or self.N < 1:
            raise ConfigError(f"{prefix}.N: must be a positive integer, got {self.N!r}")
        if self.noise_mode not in ("raw", "orthogonalized"):
            raise ConfigError(f"{prefix}.noise_mode: expected 'raw' or 'orthogonalized', got {self.noise_mode!r}")


@dataclass(frozen=True)
class FeatureBasis:
    v_c: np.ndarray
    v_s: np.ndarray

    @property
    def d(self) -> int:
        return self.v_c.shape[0]


@dataclass
class Example:
    patches: np.ndarray  # (P, d)
    y: int
    a: int

    @property
    def group(self) -> tuple[int, int]:
        return (self.y, self.a)


@dataclass
class Dataset:
    """Patches ``X`` of shape (N, P, d), labels ``y`` and spurious labels ``a``.

    ``roles[i, p]`` tells which patch of example ``i`` is core / spurious / noise.
    """

    config: DataConfig
    basis: FeatureBasis
    X: np.ndarray
    y: np.ndarray
    a: np.ndarray
    roles: np.ndarray
    _flat: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def flat(self) -> np.ndarray:
        """Patches as a contiguous (N * P, d) matrix."""
        if self._flat is None:
            self._flat = np.ascontiguousarray(self.X.reshape(-1, self.X.shape[-1]))
        return self._flat

    @property
    def s1_indices(self) -> np.ndarray:
        return np.flatnonzero(self.a == self.y)

    @property
    def s2_indices(self) -> np.ndarray:
        return np.flatnonzero(self.a != self.y)

    @property
    def alpha_hat(self) -> float:
        return float(np.count_nonzero(self.a == self.y)) / self.N

    def group_indices(self, y: int, a: int) -> np.ndarray:
        return np.flatnonzero((self.y == y) & (self.a == a))

    def group_counts(self) -> dict[tuple[int, int], int]:
        return {g: int(np.count_nonzero((self.y == g[0]) & (self.a == g[1]))) for g in GROUPS}

    def example(self, i: int) -> Example:
        return Example(self.X[i].copy(), int(self.y[i]), int(self.a[i]))

    def noise_patches(self) -> np.ndarray:
        """All noise patches, shape (N, P - 2, d), in patch order."""
        mask = self.roles == ROLE_NOISE
        return self.X[mask].reshape(self.N, -1, self.X.shape[-1])

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.config, self.basis, self.X[idx], self.y[idx], self.a[idx], self.roles[idx])


def make_basis(d: int, mode: str = "canonical", seed: int = 0) -> FeatureBasis:
    if d < 2:
        raise ConfigError(f"d: dimension must be >= 2, got {d}")
    v_c = np.zeros(d)
    v_s = np.zeros(d)
    v_c[0] = 1.0
    v_s[1] = 1.0
    if mode == "canonical":
        return FeatureBasis(v_c, v_s)
    if mode != "random_rotation":
        raise ConfigError(f"basis mode: expected 'canonical' or 'random_rotation', got {mode!r}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))  # Haar-distributed orthogonal matrix
    return FeatureBasis(np.ascontiguousarray(q[:, 0]), np.ascontiguousarray(q[:, 1]))


def _orthogonalize(noise: np.ndarray, basis: FeatureBasis) -> np.ndarray:
    for v in (basis.v_c, basis.v_s):
        noise = noise - (noise @ v)[..., None] * v
    return noise


def _sample(config: DataConfig, basis: FeatureBasis, rng: np.random.Generator, n: int):
    d, P = config.d, config.P
    y = rng.choice(np.array([-1, 1]), size=n)
    a = np.where(rng.random(n) < config.alpha, y, -y)
    noise = rng.normal(0.0, config.sigma_p / np.sqrt(d), size=(n, P - 2, d))
    if config.noise_mode == "orthogonalized":
        noise = _orthogonalize(noise, basis)
    X = np.empty((n, P, d))
    X[:, 0] = (config.beta_c * y)[:, None] * basis.v_c
    X[:, 1] = (config.beta_s * a)[:, None] * basis.v_s
    X[:, 2:] = noise
    roles = np.tile(np.array([ROLE_CORE, ROLE_SPURIOUS] + [ROLE_NOISE] * (P - 2)), (n, 1))
    if config.shuffle_patches:
        perm = np.argsort(rng.random((n, P)), axis=1)
        X = np.take_along_axis(X, perm[:, :, None], axis=1)
        roles = np.take_along_axis(roles, perm, axis=1)
    return X, y.astype(np.int64), a.astype(np.int64), roles


def sample_example(config: DataConfig, basis: FeatureBasis, rng: np.random.Generator) -> Example:
    X, y, a, _ = _sample(config, basis, rng, 1)
    return Example(X[0], int(y[0]), int(a[0]))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for (seed, keys...)."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)[0] >> 1)


def generate_dataset(config: DataConfig, basis: FeatureBasis | None = None) -> Dataset:
    if basis is None:
        basis = make_basis(config.d)
    rng = np.random.default_rng(config.seed)
    X, y, a, roles = _sample(config, basis, rng, config.N)
    return Dataset(config, basis, X, y, a, roles)


def split_sets(config: DataConfig, n_val: int = 2000, n_test: int = 10_000,
               basis: FeatureBasis | None = None) -> tuple[Dataset, Dataset, Dataset]:
    """Train / validation / test draws from one distribution with derived sub-seeds."""
    basis = basis or make_basis(config.d)
    train = generate_dataset(config, basis)
    val = generate_dataset(replace(config, N=n_val, seed=derive_seed(config.seed, 1)), basis)
    test = generate_dataset(replace(config, N=n_test, seed=derive_seed(config.seed, 2)), basis)
    return train, val, test


def paired_balanced_dataset(config: DataConfig, n_pairs: int, rng: np.random.Generator,
                            basis: FeatureBasis | None = None) -> Dataset:
    """Twin pairs sharing ``y`` and noise, one with ``a = y`` and one with ``a = -y``.

    ``config.alpha`` is ignored; the result has ``alpha_hat == 0.5`` exactly.
    """
    if n_pairs < 1:
        raise ConfigError(f"n_pairs: must be >= 1, got {n_pairs}")
    basis = basis or make_basis(config.d)
    X, y, a, roles = _sample(replace(config, alpha=1.0), basis, rng, n_pairs)
    twin = X.copy()
    spu = roles == ROLE_SPURIOUS
    twin[spu] = -twin[spu]
    X2 = np.stack([X, twin], axis=1).reshape(2 * n_pairs, config.P, config.d)
    y2 = np.repeat(y, 2)
    a2 = np.stack([a, -a], axis=1).reshape(-1)
    roles2 = np.repeat(roles, 2, axis=0)
    return Dataset(replace(config, N=2 * n_pairs), basis, X2, y2, a2, roles2)


def subsample_group_balanced(dataset: Dataset, rng: np.random.Generator) -> np.ndarray:
    """Indices with ``min_g |S_g|`` members drawn without replacement from each (y, a) group."""
    members = {g: dataset.group_indices(*g) for g in GROUPS}
    for g, idx in members.items():
        if idx.size == 0:
            raise ValueError(f"group (y={g[0]:+d}, a={g[1]:+d}) is empty; cannot build a balanced warm-up set")
    k = min(idx.size for idx in members.values())
    return np.concatenate([rng.choice(members[g], size=k, replace=False) for g in GROUPS])
