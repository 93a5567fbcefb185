"""Numerical checks of the feature-learning dynamics.

Under GD with noise orthogonal to both features, the per-step change of every
neuron's feature alignments is given exactly by

    d<w_j, v_c> = eta * 3 beta_c^3 / N * (sum_i ell_i) * <w_j, v_c>^2
    d<w_j, v_s> = eta * 3 beta_s^3 / N * (sum_{S1} ell_i - sum_{S2} ell_i) * <w_j, v_s>^2

and both alignments follow tensor-power style recurrences ``x <- x + eta A x^2``.
The checks below compare simulated trajectories with these forms and with the
crossing-order and time-scale predictions they imply. Asymptotic constants are
replaced by the explicit values in :data:`CONSTANTS`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .model import alignments, ell_weights, grad
from .optim import OptimizerState, gd_step, gdm_step
from .synthgen import Dataset

CONSTANTS = {
    "core_small": 10.0,  # "stays O~(sigma_0)" checked as <= 10 * sigma_0
    "noise_log_factor": 20.0,  # noise alignment <= 20 log(d) * sigma_0 * sigma_p
    "eta_product_band": 1.25,  # max/min of crossing_iteration * eta across a sweep
    "cancellation_factor": 50.0,
    "eta_halving_band": (1.6, 2.4),  # crossing(eta / 2) / crossing(eta)
}


@dataclass
class Trajectory:
    """Alignments at every step, and weights at every ``store_every``-th step."""

    optimizer: str
    eta: float
    gamma: float
    core: np.ndarray  # (T + 1, J)
    spurious: np.ndarray  # (T + 1, J)
    weights: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.core.shape[0] - 1

    @property
    def max_core(self) -> np.ndarray:
        return self.core.max(axis=1)

    @property
    def max_spurious(self) -> np.ndarray:
        return self.spurious.max(axis=1)


def simulate(W0: np.ndarray, data: Dataset, eta: float, steps: int, gamma: float = 0.0,
             optimizer: str = "gd", store_every: int | None = 1, stop_above: float | None = None) -> Trajectory:
    """Full-batch training that records alignments each step.

    ``stop_above`` ends the run early once either max feature contribution
    ``beta * max_j <w_j, v>`` reaches that value (used for crossing experiments).
    """
    basis, cfg = data.basis, data.config
    W = W0.copy()
    opt = OptimizerState.zeros_like(W, eta, gamma)
    core, spu, stored = [], [], {}
    for t in range(steps + 1):
        al = alignments(W, basis)
        core.append(al.core)
        spu.append(al.spurious)
        if store_every and t % store_every == 0:
            stored[t] = W.copy()
        if t == steps:
            break
        if stop_above is not None and max(cfg.beta_c * al.max_core, cfg.beta_s * al.max_spurious) >= stop_above:
            break
        G = grad(W, data)
        if optimizer == "gd":
            W = gd_step(W, G, eta)
        elif optimizer == "gdm":
            W, opt = gdm_step(W, opt, G)
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
    return Trajectory(optimizer, eta, gamma if optimizer == "gdm" else 0.0,
                      np.array(core), np.array(spu), stored)


# -- per-step recurrences ---------------------------------------------------------------

@dataclass
class RecurrenceReport:
    core_max_abs: float
    core_max_rel: float
    spurious_max_abs: float
    spurious_max_rel: float
    window: tuple[int, int]
    tol: float
    asserted: bool

    @property
    def max_rel(self) -> float:
        return max(self.core_max_rel, self.spurious_max_rel)

    @property
    def passed(self) -> bool | None:
        return self.max_rel <= self.tol if self.asserted else None


def predicted_deltas(W: np.ndarray, data: Dataset, eta: float) -> tuple[np.ndarray, np.ndarray]:
    cfg = data.config
    ell = ell_weights(W, data)
    s1 = data.a == data.y
    al = alignments(W, data.basis)
    core = eta * 3.0 * cfg.beta_c ** 3 / data.N * ell.sum() * al.core ** 2
    spu = eta * 3.0 * cfg.beta_s ** 3 / data.N * (ell[s1].sum() - ell[~s1].sum()) * al.spurious ** 2
    return core, spu


def _normwise(obs: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    err = np.abs(obs - pred)
    scale = np.abs(pred).max()
    if scale == 0.0:
        return float(err.max()), (0.0 if err.max() == 0.0 else math.inf)
    return float(err.max()), float(err.max() / scale)


def check_projection_recurrences(traj: Trajectory, data: Dataset, tol: float = 1e-10) -> RecurrenceReport:
    """Residual between observed alignment changes and the closed-form updates.

    Residuals are norm-wise per step: ``max_j |obs - pred| / max_j |pred|``.
    Only asserted for orthogonalized noise; with raw noise the noise patches
    leak into both projections and the residual is reported as measured.
    """
    if traj.optimizer != "gd":
        raise ValueError("projection recurrences hold for plain GD; got a "
                         f"{traj.optimizer!r} trajectory")
    ts = sorted(traj.weights)
    res = np.zeros((2, 2))
    first = last = None
    for t in ts:
        if t + 1 not in traj.weights:
            continue
        W, W1 = traj.weights[t], traj.weights[t + 1]
        pc, ps = predicted_deltas(W, data, traj.eta)
        a0, a1 = alignments(W, data.basis), alignments(W1, data.basis)
        for row, (obs, pred) in enumerate(((a1.core - a0.core, pc), (a1.spurious - a0.spurious, ps))):
            ab, rel = _normwise(obs, pred)
            res[row] = np.maximum(res[row], (ab, rel))
        first = t if first is None else first
        last = t + 1
    if first is None:
        raise ValueError("trajectory has no consecutive stored weights")
    return RecurrenceReport(res[0, 0], res[0, 1], res[1, 0], res[1, 1], (first, last), tol,
                            asserted=data.config.noise_mode == "orthogonalized")


# -- crossings ------------------------------------------------------------------------

@dataclass
class CrossingReport:
    threshold: float
    crossing_iteration: int | None
    eta: float | None = None
    companion_value: float | None = None


def crossing_time(values, threshold: float, eta: float | None = None, companion=None) -> CrossingReport:
    """First index with ``values[t] >= threshold``; ``companion[t]`` is reported at that index."""
    values = np.asarray(values, dtype=float)
    hits = np.flatnonzero(values >= threshold)
    if hits.size == 0:
        return CrossingReport(threshold, None, eta, None)
    t = int(hits[0])
    comp = None if companion is None else float(np.asarray(companion)[t])
    return CrossingReport(threshold, t, eta, comp)


def learning_regime(data: Dataset) -> int:
    """1 if the spurious feature should win, 2 if the core feature should."""
    cfg = data.config
    ah = data.alpha_hat
    if cfg.beta_c ** 3 < cfg.beta_s ** 3 * (2 * ah - 1):
        return 1
    if cfg.beta_c > cfg.beta_s:
        return 2
    raise ValueError(
        f"neither regime applies: beta_c^3 < beta_s^3 (2 alpha_hat - 1) fails "
        f"({cfg.beta_c ** 3:.4g} >= {cfg.beta_s ** 3 * (2 * ah - 1):.4g}) and beta_c > beta_s fails "
        f"({cfg.beta_c} <= {cfg.beta_s})")


@dataclass
class EarlyPhaseReport:
    regime: int
    sigma_0: float
    winner_crossing: CrossingReport
    loser_crossing: CrossingReport
    loser_at_crossing: float | None
    bound: float
    monotone: bool
    crosses_first: bool
    loser_small: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.crosses_first and self.loser_small


def check_early_phase(traj: Trajectory, data: Dataset, sigma_0: float,
                      C: float = CONSTANTS["core_small"]) -> EarlyPhaseReport:
    """Which feature is learned first, and does the other one stay near its init scale.

    Regime 1 (spurious wins): max spurious alignment is non-decreasing once
    positive up to its crossing of 1/beta_s, crosses before the core reaches
    1/beta_c, and at that time max core alignment is at most ``C * sigma_0``.
    Regime 2 mirrors this with the roles swapped.
    """
    regime = learning_regime(data)
    cfg = data.config
    if regime == 1:
        win, lose, b_win, b_lose = traj.max_spurious, traj.max_core, cfg.beta_s, cfg.beta_c
    else:
        win, lose, b_win, b_lose = traj.max_core, traj.max_spurious, cfg.beta_c, cfg.beta_s
    wc = crossing_time(win, 1.0 / b_win, traj.eta, companion=lose)
    lc = crossing_time(lose, 1.0 / b_lose, traj.eta)
    end = wc.crossing_iteration if wc.crossing_iteration is not None else len(win) - 1
    seg = win[: end + 1]
    pos = np.flatnonzero(seg > 0)
    monotone = True
    if pos.size:
        tail = seg[pos[0]:]
        monotone = bool(np.all(np.diff(tail) >= 0))
    crosses_first = wc.crossing_iteration is not None and (
        lc.crossing_iteration is None or wc.crossing_iteration < lc.crossing_iteration)
    bound = C * sigma_0
    loser_small = wc.companion_value is not None and wc.companion_value <= bound
    return EarlyPhaseReport(regime, sigma_0, wc, lc, wc.companion_value, bound, monotone,
                            crosses_first, loser_small)


@dataclass
class EtaScalingReport:
    etas: list[float]
    crossings: list[int | None]
    products: list[float]
    ratio: float
    band: float

    @property
    def passed(self) -> bool:
        return all(c is not None for c in self.crossings) and self.ratio <= self.band

    def halving_ratio(self, eta: float) -> float:
        """crossing(eta / 2) / crossing(eta); both step sizes must be in the sweep."""
        c = dict(zip(self.etas, self.crossings))
        if c.get(eta / 2) is None or not c.get(eta):
            return math.nan
        return c[eta / 2] / c[eta]


def spurious_crossing(W0: np.ndarray, data: Dataset, eta: float, max_steps: int = 5000) -> int | None:
    """Iteration at which max_j <w_j, v_s> first reaches 1 / beta_s under GD."""
    traj = simulate(W0, data, eta, max_steps, store_every=None, stop_above=1.0)
    return crossing_time(traj.max_spurious, 1.0 / data.config.beta_s, eta).crossing_iteration


def eta_scaling(W0: np.ndarray, data: Dataset, etas, max_steps: int = 5000,
                band: float = CONSTANTS["eta_product_band"]) -> EtaScalingReport:
    """Crossing time of the regime-1 winner across step sizes; T * eta should be ~constant."""
    crossings, products = [], []
    for eta in etas:
        c = spurious_crossing(W0, data, eta, max_steps)
        crossings.append(c)
        products.append(math.nan if c is None else c * eta)
    finite = [p for p in products if not math.isnan(p)]
    ratio = max(finite) / min(finite) if len(finite) == len(products) and min(finite) > 0 else math.inf
    return EtaScalingReport(list(etas), crossings, products, ratio, band)


@dataclass
class InitScalingReport:
    scales: list[float]
    crossings: list[int | None]

    @property
    def monotone(self) -> bool:
        """Smaller init never crosses earlier."""
        if any(c is None for c in self.crossings):
            return False
        order = np.argsort(self.scales)[::-1]
        cs = [self.crossings[i] for i in order]
        return all(b >= a for a, b in zip(cs, cs[1:]))


def init_scaling(W0: np.ndarray, data: Dataset, scales=(1.0, 0.5), eta: float = 0.1,
                 max_steps: int = 20000) -> InitScalingReport:
    """Spurious crossing time for ``scale * W0``; the rate is reported, only monotonicity is asserted."""
    return InitScalingReport(list(scales), [spurious_crossing(s * W0, data, eta, max_steps) for s in scales])


# -- balanced cancellation --------------------------------------------------------------

@dataclass
class CancellationReport:
    spurious_coeff: float
    grad_projection: np.ndarray  # per neuron |<grad_j L, v_s>|
    exact_case: bool
    tol: float

    @property
    def passed(self) -> bool:
        if self.exact_case:
            return self.spurious_coeff == 0.0 and bool(np.all(self.grad_projection == 0.0))
        return abs(self.spurious_coeff) <= self.tol


def cancellation_tol(beta_s: float, sigma_0: float, J: int, d: int,
                     factor: float = CONSTANTS["cancellation_factor"]) -> float:
    return factor * (beta_s * sigma_0 * math.sqrt(2 * math.log(J * d))) ** 3


def check_balanced_cancellation(W: np.ndarray, data: Dataset, sigma_0: float | None = None) -> CancellationReport:
    """Spurious pressure on a group-balanced set (alpha_hat = 1/2).

    With every neuron orthogonal to v_s both quantities must vanish exactly;
    otherwise the coefficient must be third-order small in the init scale.
    """
    if data.alpha_hat != 0.5:
        raise ValueError(f"balanced-cancellation check needs alpha_hat = 1/2, got {data.alpha_hat}")
    coef = metrics.spurious_coefficient(W, data)
    proj = np.abs(grad(W, data) @ data.basis.v_s)
    exact = bool(np.all(W @ data.basis.v_s == 0.0))
    if sigma_0 is None:
        sigma_0 = float(np.std(W))
    tol = cancellation_tol(data.config.beta_s, sigma_0, W.shape[0], W.shape[1])
    return CancellationReport(coef, proj, exact, tol)


# -- tensor-power recurrences -----------------------------------------------------------

@dataclass
class TensorPowerRun:
    x: np.ndarray
    y: np.ndarray
    x_crossing: int | None
    y_at_crossing: float | None
    diverged_at: int | None


def tensor_power_integrate(x0: float, y0: float, A: float, B: float, eta: float, horizon: int,
                           C: float = 1.0) -> TensorPowerRun:
    """Iterate x <- x + eta A x^2 and y <- y + eta B y^2; report y when x first reaches C."""
    if not (x0 > 0 and y0 > 0):
        raise ValueError("x0 and y0 must be positive")
    if A < 0 or B < 0:
        raise ValueError("A and B must be non-negative")
    xs, ys = [x0], [y0]
    diverged = None
    x, y = x0, y0
    for t in range(horizon):
        x = x + eta * A * x * x
        y = y + eta * B * y * y
        if not (math.isfinite(x) and math.isfinite(y)) or max(x, y) > 1e300:
            diverged = t + 1
            break
        xs.append(x)
        ys.append(y)
    xs, ys = np.array(xs), np.array(ys)
    cross = crossing_time(xs, C, companion=ys)
    return TensorPowerRun(xs, ys, cross.crossing_iteration, cross.companion_value, diverged)


def t0_bound(z0: float, m: float, M: float, v: float) -> float:
    return 3.0 / (m * z0) + (8.0 * M / m) * math.ceil(math.log(v / z0) / math.log(2))


@dataclass
class T0BoundReport:
    t0_bound: float
    crossing: int
    verified: bool


def tensor_power_t0_bound(z0: float, m: float, M: float, v: float) -> T0BoundReport:
    """Closed-form time after which z_t >= v, checked against the slowest admissible sequence.

    The slowest sequence z <- z + m z^2 is increasing, so ``z_t >= v`` for every
    ``t >= t0`` exactly when its first crossing is at most ``t0``.
    """
    if not (0 < z0 <= v):
        raise ValueError(f"need 0 < z0 <= v, got z0={z0}, v={v}")
    if not (0 < m <= M):
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    bound = t0_bound(z0, m, M, v)
    z, t = z0, 0
    limit = math.floor(bound)
    while z < v and t <= limit:
        z = z + m * z * z
        t += 1
    return T0BoundReport(bound, t, z >= v and t <= bound)


# -- noise and per-example derivative checks -----------------------------------------

def _noise_proj(noise: np.ndarray, W: np.ndarray) -> np.ndarray:
    n, k, d = noise.shape
    return (noise.reshape(-1, d) @ W.T).reshape(n, k, -1)  # (N, P-2, J)


@dataclass
class NoiseMonitorReport:
    max_alignment: float
    ratio: float  # max_alignment / (sigma_0 * sigma_p)
    bound: float
    at: tuple[int, int, int]  # (step, neuron, example)

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound


def noise_alignment_monitor(weights: dict[int, np.ndarray], data: Dataset, sigma_0: float,
                            log_factor: float = CONSTANTS["noise_log_factor"]) -> NoiseMonitorReport:
    """Running max over (step, neuron, example) of |<w_j, xi_i>| over all noise patches."""
    noise = data.noise_patches()  # (N, P-2, d)
    best, at = 0.0, (0, 0, 0)
    for t in sorted(weights):
        z = np.abs(_noise_proj(noise, weights[t])).max(axis=1).T  # (J, N)
        k = int(np.argmax(z))
        if z.flat[k] > best:
            j, i = np.unravel_index(k, z.shape)
            best, at = float(z.flat[k]), (t, int(j), int(i))
    scale = sigma_0 * data.config.sigma_p
    return NoiseMonitorReport(best, best / scale, log_factor * math.log(data.config.d), at)


@dataclass
class G1Report:
    max_log_ratio_excess: float  # max_i (|log(ell_i / g1)| - c_i); <= 0 means the sandwich holds
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_log_ratio_excess <= 1e-12


def check_g1_sandwich(W: np.ndarray, data: Dataset) -> G1Report:
    """For i in S1, e^{-c_i} g1 <= ell_i <= e^{c_i} g1 with c_i = sum_j sum_noise |<w_j, xi>|^3.

    Holds because y_i f(x_i) differs from the feature-only margin by exactly the
    noise cubes and log-sigmoid is 1-Lipschitz.
    """
    cfg = data.config
    g1 = metrics.g1_value(W, data.basis, cfg.beta_c, cfg.beta_s)
    s1 = data.s1_indices
    ell = ell_weights(W, data)[s1]
    noise = data.noise_patches()[s1]
    c = np.sum(np.abs(_noise_proj(noise, W)) ** 3, axis=(1, 2))
    excess = np.abs(np.log(ell) - math.log(g1)) - c
    return G1Report(float(excess.max()), int(s1.size))
