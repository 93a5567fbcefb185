from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import expit

from .model import ell_weights, scores
from .synthgen import GROUPS, Dataset, FeatureBasis


@dataclass
class TraceRecord:
    iteration: int
    phase: str  # "warmup", "expansion_<k>" or "erm"
    active_set_size: int
    train_loss: float
    max_align_core: float
    max_align_spu: float
    overall_acc: float
    wg_acc: float
    val_wg_acc: float
    g1: float
    spurious_coeff: float


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))


def write_trace_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(asdict(rec))


def read_trace_csv(path) -> list[TraceRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TraceRecord(
                iteration=int(row["iteration"]), phase=row["phase"],
                active_set_size=int(row["active_set_size"]),
                **{k: float(row[k]) for k in TRACE_COLUMNS[3:]},
            ))
    return out


def _correct(W: np.ndarray, data: Dataset) -> np.ndarray:
    # sgn(0) = 0 never equals a label, so f = 0 counts as a miss
    return np.sign(scores(W, data)) == data.y


def overall_accuracy(W: np.ndarray, data: Dataset) -> float:
    if data.N == 0:
        raise ValueError("empty dataset slice")
    return float(np.mean(_correct(W, data)))


def group_accuracies(correct: np.ndarray, y: np.ndarray, a: np.ndarray) -> dict[tuple[int, int], float]:
    out = {}
    for g in GROUPS:
        mask = (y == g[0]) & (a == g[1])
        n = int(mask.sum())
        if n == 0:
            raise ValueError(f"group (y={g[0]:+d}, a={g[1]:+d}) has no examples; worst-group accuracy is undefined")
        out[g] = float(correct[mask].sum()) / n
    return out


def worst_group_accuracy(W: np.ndarray, data: Dataset) -> tuple[float, dict[tuple[int, int], float]]:
    """Minimum within-group accuracy over the four (y, a) groups, plus the breakdown."""
    breakdown = group_accuracies(_correct(W, data), data.y, data.a)
    return min(breakdown.values()), breakdown


def accuracy_report(W: np.ndarray, data: Dataset) -> tuple[float, float, dict[tuple[int, int], float]]:
    """Overall accuracy, worst-group accuracy and per-group breakdown from one forward pass."""
    correct = _correct(W, data)
    breakdown = group_accuracies(correct, data.y, data.a)
    return float(np.mean(correct)), min(breakdown.values()), breakdown


def spurious_coefficient(W: np.ndarray, data: Dataset) -> float:
    """(sum_{S1} ell_i - sum_{S2} ell_i) / N: net push of the gradient along v_s."""
    ell = ell_weights(W, data)
    s1 = data.a == data.y
    return float(ell[s1].sum() - ell[~s1].sum()) / data.N


def g1_value(W: np.ndarray, basis: FeatureBasis, beta_c: float, beta_s: float) -> float:
    c = W @ basis.v_c
    s = W @ basis.v_s
    return float(expit(-np.sum(beta_c ** 3 * c ** 3 + beta_s ** 3 * s ** 3)))


def group_label(g: tuple[int, int]) -> str:
    return f"y={g[0]:+d},a={g[1]:+d}"
