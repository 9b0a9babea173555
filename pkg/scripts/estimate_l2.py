"""Sampled Hessian-Lipschitz estimate of the envelope near the critical points of a problem.

Draws pairs in small balls around the declared minimizers and saddles,
computes finite-difference Hessians and reports the largest ratio
``|H(x) - H(y)| / |x - y|`` next to the declared constant.
"""
import argparse

import numpy as np

from moreau_escape.envelope import fd_hessian_batch, make_envelope
from moreau_escape.problems import PROBLEMS, get_problem


def estimate(name, mu=None, radius=0.1, pairs=2000, seed=0):
    p = get_problem(name)
    h = make_envelope(p, mu)
    rng = np.random.default_rng(seed)
    centers = np.asarray(list(p.minimizers) + list(p.saddles), dtype=float).reshape(-1, p.dim)
    c = centers[rng.integers(len(centers), size=pairs)]
    x = c + rng.uniform(-radius, radius, size=c.shape)
    y = x + rng.normal(scale=0.01, size=x.shape)
    Hx, _, _ = fd_hessian_batch(h, x)
    Hy, _, _ = fd_hessian_batch(h, y)
    ratio = np.linalg.norm(Hx - Hy, ord=2, axis=(1, 2)) / np.linalg.norm(x - y, axis=1)
    return float(np.max(ratio)), p.L2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", choices=sorted(PROBLEMS), action="append")
    ap.add_argument("--mu", type=float)
    ap.add_argument("--radius", type=float, default=0.1)
    ap.add_argument("--pairs", type=int, default=2000)
    args = ap.parse_args()
    for name in args.problem or sorted(PROBLEMS):
        est, declared = estimate(name, args.mu, args.radius, args.pairs)
        print(f"{name}: sampled max {est:.4g}, twice that {2 * est:.4g}, declared {declared:.4g}")


if __name__ == "__main__":
    main()
