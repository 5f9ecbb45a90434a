"""Sampling-based MPC on the cartpole swing-up, with and without learning.

First shows the planning ceiling: receding-horizon MPPI driven directly by
the true reward swings the pole up from hanging. Then runs a shortened
preference-learning session with an MLP reward and evaluates the learned
ensemble the same way.

The learning phase takes several minutes of single-core compute; pass
--skip-learning to only watch the planner.
"""

import sys
import time

import numpy as np
from dataclasses import replace

from prefcut import cartpole_config, make_env, run_hsbc
from prefcut.harness import eval_seeds, oracle_score


def main():
    cfg = cartpole_config(seed=0)
    env = make_env(cfg.env)
    planner = cfg.resolved_eval_planner()

    print("planning directly with the true reward (the oracle ceiling)...")
    t0 = time.time()
    mean, std, scores = oracle_score(env, planner, cfg.eval_len,
                                     eval_seeds(0, 0, 3))
    print(f"  oracle return over {cfg.eval_len} steps: "
          f"{mean:.1f} +- {std:.1f}  ({time.time() - t0:.0f}s)")
    print(f"  per-step reward {mean / cfg.eval_len:.2f} "
          "(1.0 = balanced upright at the center, standing still)")

    if "--skip-learning" in sys.argv:
        return

    print("\nlearning the reward from simulated preferences "
          "(shortened session, ~10 minutes)...")
    short = replace(cfg, iterations=12)
    result = run_hsbc(short)
    print("\nlearning curve:")
    for p in result.curve.points:
        print(f"  after {p.queries:3d} labels: {p.mean:7.1f} +- {p.std:.1f}")
    final = result.curve.points[-1].mean
    print(f"\nfinal/oracle ratio: {final / mean:.2f}")


if __name__ == "__main__":
    main()
