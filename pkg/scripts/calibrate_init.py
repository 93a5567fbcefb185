"""Sweep the init scale and expansion schedule; prints PDE and add-all accuracies per setting.

This is the sweep used to pick the default sigma_0 and schedule. Usage:

    python scripts/calibrate_init.py --sigma0 0.13 0.14 0.16 --schedule 20:100:50 8:100:1000
"""
import argparse
from dataclasses import replace

import numpy as np

from spurious_pde import experiments
from spurious_pde.config import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sigma0", type=float, nargs="+", default=[0.13])
    ap.add_argument("--schedule", nargs="+", default=["20:100:50"], help="K:J_exp:m")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    print("sigma_0  schedule     erm_overall  erm_wg  pde_overall  pde_wg  add_all_wg  gap")
    for s0 in args.sigma0:
        for sched in args.schedule:
            K, J_exp, m = map(int, sched.split(":"))
            base = ExperimentConfig()
            cfg = replace(base, model=replace(base.model, sigma_0=s0),
                          pde=replace(base.pde, K=K, J_exp=J_exp, m=m))
            cache: dict = {}
            rep = experiments.ablation_add_all(cfg, args.seeds, cache=cache)
            runs = [experiments.run_seed(cfg, s, ["pde", "erm-gd"], cache) for s in args.seeds]
            overall = np.mean([r["pde"]["best"]["overall_acc"] for r in runs])
            erm_overall = np.mean([r["erm-gd"]["final"]["overall_acc"] for r in runs])
            erm_wg = np.mean([r["erm-gd"]["final"]["wg_acc"] for r in runs])
            pde_wg = np.mean([r["pde_wg"] for r in rep.data["rows"]])
            abl_wg = np.mean([r["add_all_wg"] for r in rep.data["rows"]])
            print(f"{s0:7.3f}  {sched:11s}  {100 * erm_overall:11.2f}  {100 * erm_wg:6.2f}  {100 * overall:11.2f}  {pde_wg:6.2f}  {abl_wg:10.2f}  {rep.data['gap']:5.2f}", flush=True)


if __name__ == "__main__":
    main()
