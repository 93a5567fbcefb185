"""Command-line entry point.

    spurious-pde generate      --config C [--seed N] [--out DIR]
    spurious-pde train         --config C --mode {erm-gd,erm-gdm,pde,subsample} [--seed N] [--out DIR]
    spurious-pde reproduce     --target T [--config C] [--out DIR]
    spurious-pde gradcheck     [--seed N] [--out DIR]
    spurious-pde verify-theory [--config C] [--out DIR]

The output directory defaults to ``$SPURIOUS_PDE_OUT`` or ``./runs``. ``train``
also accepts a run's ``manifest.json`` as ``--config`` to repeat that run.
Exit status is 0 when every asserted check passes, 1 when one fails and 2 on
usage, configuration or input errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import experiments, metrics, storage
from .config import ExperimentConfig, load_config, parse_config
from .synthgen import ConfigError

OUT_ENV = "SPURIOUS_PDE_OUT"
MANIFEST_FORMAT = "spurious-pde-manifest/1"
TRAIN_MODES = ("erm-gd", "erm-gdm", "pde", "subsample")


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "runs")


def _read_config(path, seed):
    """Config (and mode, if ``path`` is a run manifest) with an optional seed override."""
    mode = None
    if path is None:
        cfg = ExperimentConfig()
    else:
        raw = json.loads(Path(path).read_text()) if Path(path).suffix == ".json" else None
        if isinstance(raw, dict) and raw.get("format") == MANIFEST_FORMAT:
            cfg, mode = parse_config(raw["config"]), raw["mode"]
        else:
            cfg = load_config(path)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg, mode


def _hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(Path(x) for x in paths):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _print_checks(rep: experiments.Report) -> None:
    for c in rep.checks:
        tag = "PASS" if c.passed else ("FAIL" if c.asserted else "note")
        print(f"[{tag}] {c.name}" + (f" ({c.detail})" if c.detail else ""))


def cmd_generate(args) -> int:
    cfg, _ = _read_config(args.config, args.seed)
    train, _, _ = experiments.make_sets(cfg)
    out = storage.save_dataset(train, _out_dir(args))
    print(f"wrote {train.N} examples to {out}")
    return 0


def cmd_train(args) -> int:
    cfg, manifest_mode = _read_config(args.config, args.seed)
    mode = args.mode or manifest_mode
    if mode not in TRAIN_MODES:
        raise ConfigError(f"--mode: expected one of {', '.join(TRAIN_MODES)}, got {mode!r}")
    if cfg.dataset and not Path(cfg.dataset, "meta.json").exists():
        raise FileNotFoundError(f"dataset: no dataset found at {cfg.dataset}")
    config_dict = cfg.to_dict()
    dataset_hash = None
    if cfg.dataset:
        dataset_hash = _hash_files(Path(cfg.dataset).iterdir())
    content_hash = hashlib.sha256(json.dumps({"config": config_dict, "mode": mode, "dataset": dataset_hash},
                                             sort_keys=True).encode()).hexdigest()
    run_id = f"{mode}-seed{cfg.data.seed}-{content_hash[:10]}"
    run_dir = _out_dir(args) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    t = time.perf_counter()
    sets = experiments.make_sets(cfg)
    result = experiments.run_mode(cfg, mode, sets)
    wall = time.perf_counter() - t

    summary = experiments.summarize(mode, result, sets[2], wall)
    summary["config"] = config_dict
    metrics.write_trace_csv(run_dir / "trace.csv", result.traces)
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    J, d = result.final_W.shape
    storage.save_weights(run_dir / "best.ckpt", result.best_W, result.best_iteration, cfg.model.seed)
    storage.save_weights(run_dir / "final.ckpt", result.final_W, result.iterations, cfg.model.seed)
    if result.opt_state is not None:
        storage.save_optimizer(run_dir / "optimizer.ckpt", result.opt_state, (J, d))
    outputs = sorted(p.name for p in run_dir.iterdir() if p.name != "manifest.json")
    manifest = {
        "format": MANIFEST_FORMAT,
        "run_id": run_id,
        "mode": mode,
        "config": config_dict,
        "seeds": {"data": cfg.data.seed, "model": cfg.model.seed, "pde": cfg.pde.seed},
        "dataset_sha256": dataset_hash,
        "content_hash": content_hash,
        "outputs": outputs,
        "wall_time_s": wall,
        "numpy_version": np.__version__,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    chosen = summary[summary["reported"]]
    print(f"{run_dir}: overall {100 * chosen['overall_acc']:.2f}%, worst-group {100 * chosen['wg_acc']:.2f}% "
          f"({summary['reported']} weights, {wall:.1f}s)")
    return 0


def cmd_reproduce(args) -> int:
    cfg, _ = _read_config(args.config, None)
    if args.target not in experiments.TARGETS:
        raise ConfigError(f"--target: expected one of {', '.join(experiments.TARGETS)}, got {args.target!r}")
    rep = experiments.reproduce(args.target, cfg)
    paths = experiments.write_report(rep, _out_dir(args))
    _print_checks(rep)
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0 if rep.ok else 1


def cmd_gradcheck(args) -> int:
    reports = experiments.gradcheck_suite(seed=args.seed or 0)
    worst = max(r.max_rel_error for r in reports)
    ok = all(r.passed() for r in reports)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gradcheck.json").write_text(json.dumps(
        {"ok": ok, "tol": 1e-6, "max_rel_error": worst, "instances": [asdict(r) for r in reports]}, indent=2))
    print(f"[{'PASS' if ok else 'FAIL'}] {len(reports)} instances, max relative error {worst:.2e}")
    return 0 if ok else 1


def cmd_verify_theory(args) -> int:
    cfg, _ = _read_config(args.config, None)
    rep = experiments.theory_suite(cfg)
    experiments.write_report(rep, _out_dir(args))
    _print_checks(rep)
    return 0 if rep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spurious-pde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", metavar="PATH", help="experiment config (JSON)")
        if seed:
            p.add_argument("--seed", type=int, metavar="N", help="override every seed in the config")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./runs)")

    p = sub.add_parser("generate", help="write the training set to disk")
    common(p)
    p.set_defaults(func=cmd_generate)
    p = sub.add_parser("train", help="train one model and write a run directory")
    common(p)
    p.add_argument("--mode", metavar="NAME", help=" | ".join(TRAIN_MODES))
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("reproduce", help="run a canned reproduction target")
    common(p, seed=False)
    p.add_argument("--target", metavar="NAME", required=True, help=" | ".join(experiments.TARGETS))
    p.set_defaults(func=cmd_reproduce)
    p = sub.add_parser("gradcheck", help="closed-form gradient vs finite differences")
    common(p, config=False)
    p.set_defaults(func=cmd_gradcheck)
    p = sub.add_parser("verify-theory", help="run all dynamics checks")
    common(p, seed=False)
    p.set_defaults(func=cmd_verify_theory)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, storage.FormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
