"""Two-layer CNN with cubic activation shared across patches.

    f(x; W) = sum_j sum_p <w_j, x^(p)>^3

All batch routines take a :class:`~spurious_pde.synthgen.Dataset` and work on its
flattened (N * P, d) patch matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .synthgen import ConfigError, Dataset, Example, FeatureBasis


@dataclass(frozen=True)
class ModelConfig:
    J: int = 40
    d: int = 50
    sigma_0: float = 0.13
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self, prefix: str = "model") -> None:
        if int(self.J) != self.J or self.J < 1:
            raise ConfigError(f"{prefix}.J: must be a positive integer, got {self.J!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"{prefix}.d: must be a positive integer, got {self.d!r}")
        if not self.sigma_0 > 0:
            # W = 0 is a stationary point of the loss: nothing would ever train
            raise ConfigError(f"{prefix}.sigma_0: must be > 0, got {self.sigma_0!r}")


def init_weights(config: ModelConfig) -> np.ndarray:
    """J x d matrix with i.i.d. N(0, sigma_0^2) entries; row j is neuron w_j."""
    rng = np.random.default_rng(config.seed)
    return rng.normal(0.0, config.sigma_0, size=(config.J, config.d))


def _check(W: np.ndarray, d: int) -> None:
    if W.ndim != 2 or W.shape[1] != d:
        raise ValueError(f"shape mismatch: weights {W.shape} vs patch dimension {d}")


def forward(W: np.ndarray, x: Example | np.ndarray) -> float:
    patches = x.patches if isinstance(x, Example) else np.asarray(x)
    _check(W, patches.shape[-1])
    z = patches @ W.T
    return float(np.sum(z * z * z))


def _projections(W: np.ndarray, data: Dataset) -> np.ndarray:
    _check(W, data.X.shape[-1])
    return data.flat @ W.T  # (N * P, J)


def scores(W: np.ndarray, data: Dataset) -> np.ndarray:
    z = _projections(W, data)
    return (z * z * z).reshape(data.N, -1).sum(axis=1)


def logistic_loss(z):
    """log(1 + exp(-z)), stable for large |z|."""
    return np.logaddexp(0.0, -np.asarray(z, dtype=float))


def logistic_loss_derivative(z):
    return -expit(-np.asarray(z, dtype=float))


def _nonempty(data: Dataset) -> None:
    if data.N == 0:
        raise ValueError("empty dataset slice")


def batch_loss(W: np.ndarray, data: Dataset) -> float:
    _nonempty(data)
    return float(np.mean(logistic_loss(data.y * scores(W, data))))


def ell_weights(W: np.ndarray, data: Dataset) -> np.ndarray:
    """Per-example sigmoid(-y_i f(x_i; W)), each in (0, 1)."""
    _nonempty(data)
    return expit(-data.y * scores(W, data))


def grad(W: np.ndarray, data: Dataset) -> np.ndarray:
    """Gradient of the mean logistic loss with respect to W.

    Uses the per-example form -(3/N) sum_i ell_i y_i sum_p <w_j, x^(p)>^2 x^(p),
    which is exact for any noise (the grouped core/spurious/noise form is only
    a rewriting of it).
    """
    _nonempty(data)
    z = _projections(W, data)
    f = (z * z * z).reshape(data.N, -1).sum(axis=1)
    coef = -3.0 / data.N * expit(-data.y * f) * data.y
    coef = np.repeat(coef, data.X.shape[1])
    return (z * z * coef[:, None]).T @ data.flat


@dataclass
class Alignments:
    core: np.ndarray  # (J,) <w_j, v_c>
    spurious: np.ndarray  # (J,) <w_j, v_s>

    @property
    def max_core(self) -> float:
        return float(self.core.max())

    @property
    def max_spurious(self) -> float:
        return float(self.spurious.max())


def alignments(W: np.ndarray, basis: FeatureBasis) -> Alignments:
    return Alignments(W @ basis.v_c, W @ basis.v_s)
