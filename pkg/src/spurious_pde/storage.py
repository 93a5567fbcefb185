"""On-disk formats.

Dataset directory::

    meta.json     config, feature basis, group counts, array shape
    patches.f64   little-endian float64, example-major / patch-major / coordinate-minor
    labels.json   [[y, a], ...] in example order

Weight and optimizer checkpoints are one file each: a single line of JSON
header, a newline, then the little-endian float64 matrix in row-major order
(neuron j is row j).
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .optim import OptimizerState
from .synthgen import (GROUPS, ROLE_CORE, ROLE_NOISE, ROLE_SPURIOUS, DataConfig, Dataset,
                       FeatureBasis)

DATASET_FORMAT = "spurious-pde-dataset/1"
WEIGHTS_FORMAT = "spurious-pde-weights/1"
OPTIMIZER_FORMAT = "spurious-pde-optimizer/1"
LE_F64 = np.dtype("<f8")


class FormatError(ValueError):
    pass


def save_dataset(data: Dataset, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": DATASET_FORMAT,
        "config": asdict(data.config) | {"N": data.N},
        "basis": {"v_c": data.basis.v_c.tolist(), "v_s": data.basis.v_s.tolist()},
        "group_counts": {f"y={g[0]:+d},a={g[1]:+d}": n for g, n in data.group_counts().items()},
        "alpha_hat": data.alpha_hat,
        "shape": list(data.X.shape),
        "dtype": "<f8",
        "order": "example, patch, coordinate",
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    np.ascontiguousarray(data.X, dtype=LE_F64).tofile(out / "patches.f64")
    (out / "labels.json").write_text(json.dumps(np.stack([data.y, data.a], axis=1).tolist()))
    return out


def _recover_roles(X: np.ndarray, y: np.ndarray, a: np.ndarray, cfg: DataConfig,
                   basis: FeatureBasis) -> np.ndarray:
    core = (cfg.beta_c * y)[:, None] * basis.v_c
    spu = (cfg.beta_s * a)[:, None] * basis.v_s
    is_core = np.all(X == core[:, None, :], axis=2)
    is_spu = np.all(X == spu[:, None, :], axis=2) & ~is_core
    if not (np.all(is_core.sum(axis=1) >= 1) and np.all(is_spu.sum(axis=1) >= 1)):
        raise FormatError("patches do not contain the expected core / spurious patch for every example")
    roles = np.full(X.shape[:2], ROLE_NOISE)
    # first match wins in the (measure-zero) event of duplicates
    roles[np.arange(len(y)), is_core.argmax(axis=1)] = ROLE_CORE
    roles[np.arange(len(y)), is_spu.argmax(axis=1)] = ROLE_SPURIOUS
    return roles


def load_dataset(directory) -> Dataset:
    src = Path(directory)
    meta = json.loads((src / "meta.json").read_text())
    if meta.get("format") != DATASET_FORMAT:
        raise FormatError(f"meta.json: unsupported format {meta.get('format')!r}")
    cfg = DataConfig(**meta["config"])
    basis = FeatureBasis(np.array(meta["basis"]["v_c"]), np.array(meta["basis"]["v_s"]))
    shape = tuple(meta["shape"])
    raw = (src / "patches.f64").read_bytes()
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise FormatError(f"patches.f64: expected {expected} bytes for shape {shape}, found {len(raw)}")
    X = np.frombuffer(raw, dtype=LE_F64).reshape(shape).astype(float)
    labels = np.array(json.loads((src / "labels.json").read_text()), dtype=np.int64).reshape(-1, 2)
    if labels.shape[0] != shape[0]:
        raise FormatError(f"labels.json: expected {shape[0]} label pairs, found {labels.shape[0]}")
    y, a = labels[:, 0].copy(), labels[:, 1].copy()
    return Dataset(cfg, basis, X, y, a, _recover_roles(X, y, a, cfg, basis))


def _write_matrix(path, header: dict, M: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(M, dtype=LE_F64).tobytes())


def _read_matrix(path, fmt: str) -> tuple[dict, np.ndarray]:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    header = json.loads(blob[:nl])
    if header.get("format") != fmt:
        raise FormatError(f"{path}: expected format {fmt!r}, got {header.get('format')!r}")
    J, d = header["J"], header["d"]
    body = blob[nl + 1:]
    if len(body) != J * d * 8:
        raise FormatError(f"{path}: expected {J * d * 8} bytes of matrix data, found {len(body)}")
    return header, np.frombuffer(body, dtype=LE_F64).reshape(J, d).astype(float)


def save_weights(path, W: np.ndarray, iteration: int = 0, seed: int = 0, **extra) -> None:
    header = {"format": WEIGHTS_FORMAT, "J": W.shape[0], "d": W.shape[1], "iteration": iteration,
              "seed": seed, **extra}
    _write_matrix(path, header, W)


def load_weights(path) -> tuple[np.ndarray, dict]:
    header, W = _read_matrix(path, WEIGHTS_FORMAT)
    return W, header


def save_optimizer(path, state: OptimizerState, shape: tuple[int, int]) -> None:
    g = state.g if state.g is not None else np.zeros(shape)
    header = {"format": OPTIMIZER_FORMAT, "J": shape[0], "d": shape[1], "eta": state.eta,
              "gamma": state.gamma, "step_count": state.step_count}
    _write_matrix(path, header, g)


def load_optimizer(path) -> OptimizerState:
    header, g = _read_matrix(path, OPTIMIZER_FORMAT)
    return OptimizerState(header["eta"], header["gamma"], g, header["step_count"])


def group_key(g: tuple[int, int]) -> str:
    return f"y={g[0]:+d},a={g[1]:+d}"


ALL_GROUP_KEYS = [group_key(g) for g in GROUPS]
