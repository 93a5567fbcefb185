"""Run the dynamics checks on the case-1 and case-2 settings and print each result."""
import sys

from spurious_pde import experiments
from spurious_pde.config import ExperimentConfig


if __name__ == "__main__":
    rep = experiments.theory_suite(ExperimentConfig())
    for c in rep.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name} ({c.detail})")
    sys.exit(0 if rep.ok else 1)
