"""Independent checks: central finite differences and loop-based accuracy counting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import batch_loss, grad
from .synthgen import Dataset


def finite_diff_grad(W: np.ndarray, data: Dataset | None = None, h: float = 1e-5, loss=None) -> np.ndarray:
    """Central-difference gradient of ``loss(W)`` (default: the mean logistic loss on ``data``)."""
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    if loss is None:
        def loss(V):
            return batch_loss(V, data)
    W = np.array(W, dtype=float)
    out = np.empty_like(W)
    for idx in np.ndindex(W.shape):
        orig = W[idx]
        W[idx] = orig + h
        up = loss(W)
        W[idx] = orig - h
        down = loss(W)
        W[idx] = orig
        out[idx] = (up - down) / (2 * h)
    return out


@dataclass
class GradCheckReport:
    instance: str
    h: float
    max_abs_error: float
    max_rel_error: float
    worst_entry: tuple[int, int]

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_rel_error <= tol


def gradcheck(W: np.ndarray, data: Dataset, h: float = 1e-5, instance: str = "") -> GradCheckReport:
    """Compare the closed-form gradient with central differences.

    Relative error of an entry is ``|a - n| / max(|a|, |n|, 1e-8 * scale)`` where
    ``scale`` is the largest analytic entry, so near-zero entries are judged on
    the matrix's scale rather than their own.
    """
    analytic = grad(W, data)
    numeric = finite_diff_grad(W, data, h)
    err = np.abs(analytic - numeric)
    scale = max(float(np.abs(analytic).max()), 1e-300)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8 * scale)
    rel = err / denom
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    return GradCheckReport(instance, h, float(err.max()), float(rel.max()), (int(worst[0]), int(worst[1])))


def brute_force_metrics(W, data: Dataset) -> tuple[float, float]:
    """Overall and worst-group accuracy by explicit loops over examples, neurons and patches."""
    if data.N > 1000:
        raise ValueError("brute-force metrics are for small sets (N <= 1000)")
    W = np.asarray(W).tolist()
    hits: dict[tuple[int, int], list[int]] = {}
    total = 0
    for i in range(data.N):
        f = 0.0
        for w in W:
            for patch in data.X[i].tolist():
                z = math.fsum(wk * xk for wk, xk in zip(w, patch))
                f += z ** 3
        y, a = int(data.y[i]), int(data.a[i])
        pred = 1 if f > 0 else (-1 if f < 0 else 0)
        ok = int(pred == y)
        total += ok
        hits.setdefault((y, a), []).append(ok)
    overall = total / data.N
    if len(hits) < 4:
        raise ValueError("all four (y, a) groups are needed for worst-group accuracy")
    return overall, min(sum(v) / len(v) for v in hits.values())
