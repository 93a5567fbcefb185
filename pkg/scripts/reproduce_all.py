"""Run every reproduction target and write reports under results/ (about 5 minutes)."""
import argparse
import sys
import time

from spurious_pde import experiments
from spurious_pde.config import ExperimentConfig, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="base experiment config (default: case-1 settings)")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()

    ok = True
    cache: dict = {}
    for target in experiments.TARGETS:
        t = time.perf_counter()
        if target == "table2":
            rep = experiments.table2(cfg, cache=cache)
        elif target == "ablation-add-all":
            rep = experiments.ablation_add_all(cfg, cache=cache)
        else:
            rep = experiments.reproduce(target, cfg)
        experiments.write_report(rep, args.out)
        print(f"== {target} ({time.perf_counter() - t:.0f}s)")
        for c in rep.checks:
            print(f"   [{'PASS' if c.passed else ('FAIL' if c.asserted else 'note')}] {c.name} {c.detail}")
        ok &= rep.ok
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
