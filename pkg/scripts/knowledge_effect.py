"""Wall-length agreement with and without the same-length knowledge base.

Two adjacent rooms share their true height, but the top of the right room
is uninformative. Each seeded run starts the right room at a random height
and reports the final neighbour-wall length difference |d|.

Usage: python3 scripts/knowledge_effect.py [--runs N] [--iters N]
"""

import argparse

import numpy as np

from semloft.detectors import detect_all
from semloft.environments import knowledge_fixture
from semloft.mcmc import KERNELS, ChainConfig, ChainContext, Kernel, run
from semloft.scoring import ScoringParams
from semloft.world import Unit, UnitClassThresholds, neighbour_walls

WEIGHTS = tuple(1.0 if k in (Kernel.SHRINK, Kernel.DILATE, Kernel.INTERCHANGE) else 0.0 for k in KERNELS)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--iters", type=int, default=3000)
    args = ap.parse_args()
    fx = knowledge_fixture()
    det = detect_all(fx.map_c)
    lo, hi = fx.ambiguous_rows
    for name, kb in (("knowledge base", (2.0, 2.0, 2.0, 2.0)), ("zero weights", (0.0, 0.0, 0.0, 0.0))):
        ctx = ChainContext(fx.map_c, ScoringParams(kb_weights=kb), det, UnitClassThresholds(1e5))
        ds = []
        for seed in range(args.runs):
            y1 = int(np.random.default_rng(seed).integers(lo + 2, hi + 1))
            init = ctx.make_world([fx.truth.units[0], Unit(fx.right.x0, fx.right.y0, fx.right.x1, y1)])
            tr = run(ctx, ChainConfig(kernel_weights=WEIGHTS, max_iterations=args.iters, seed=seed), init_world=init)
            a, b = neighbour_walls(*tr.best_world.units)
            ds.append(abs(a - b))
        print(f"{name:15s} |d| per run {ds}  within 2 cells: {sum(d <= 2 for d in ds)}/{args.runs}")


if __name__ == "__main__":
    main()
