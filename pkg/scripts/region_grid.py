"""Certified region of the abs-quartic envelope on a grid, plus a sweep of runs started on it.

Writes ``grid.csv`` and a run directory under ``--out``, then checks that every
certified iterate falls in the grid-certified region.
"""
import argparse
import os

import numpy as np

from moreau_escape.harness import ExperimentConfig, grid_certify, run_experiment
from moreau_escape.problems import Box


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/region_grid")
    ap.add_argument("--n", type=int, default=301)
    ap.add_argument("--inits", type=int, default=200)
    ap.add_argument("--T", type=int, default=2000)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    box = Box(np.full(2, -1.5), np.full(2, 1.5))
    rep = grid_certify("abs_quartic", 0.5, 0.04, 0.04, box, args.n)
    rep.write_csv(os.path.join(args.out, "grid.csv"))
    _, count = rep.components()
    print(f"grid: {int(rep.passed.sum())} passed cells in {count} components")

    cfg = ExperimentConfig(problem="abs_quartic", model="prox-gradient", mu=0.5, T=args.T,
                           inits={"random": {"count": args.inits, "seed": 0,
                                             "box": [box.lo.tolist(), box.hi.tolist()]}},
                           seeds=[0], outputs=os.path.join(args.out, "runs"), write_traces=False)
    result = run_experiment(cfg)
    pts = [s.trace.iterates[s.certified_steps] for s in result.runs if s.certified_steps.size]
    pts = np.concatenate(pts) if pts else np.zeros((0, 2))
    inside = rep.contains(pts) if len(pts) else np.zeros(0, bool)
    print(f"runs: {len(pts)} certified iterates from "
          f"{sum(s.certified_steps.size > 0 for s in result.runs)}/{len(result.runs)} runs; "
          f"{int(inside.sum())}/{len(pts)} inside the grid region")


if __name__ == "__main__":
    main()
