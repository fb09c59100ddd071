"""Total-variation distance between a chain and the exact posterior over a
small family of single-unit worlds, as a function of chain length.

Usage: python3 scripts/chain_tv.py [--steps N] [--seed S]
"""

import argparse
import time

import numpy as np

from semloft.gridmap import ClassifiedGrid, NoiseModel, classify, synth_map
from semloft.mcmc import KERNELS, ChainConfig, ChainContext, Kernel, KernelParams, TinyDomain, enumerate_posterior, run, total_variation
from semloft.scoring import LookupTable, ScoringParams
from semloft.world import Unit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    lookup = LookupTable(np.full((3, 3), 0.32) + np.eye(3) * 0.04)
    ctx = ChainContext(ClassifiedGrid(np.zeros((30, 40), dtype=np.int8)), ScoringParams(lookup=lookup), kernel=KernelParams(max_step=4))
    truth = ctx.make_world([Unit(8, 6, 30, 24)])
    ctx.map_c = classify(synth_map(truth, (40, 30), NoiseModel.symmetric(0.1, seed=1)))
    domain = TinyDomain((6, 10), (4, 8), (28, 32), (22, 26))
    en = enumerate_posterior(ctx, domain)
    weights = tuple(1.0 if k in (Kernel.SHRINK, Kernel.DILATE) else 0.0 for k in KERNELS)
    t0 = time.perf_counter()
    trace = run(
        ctx,
        ChainConfig(kernel_weights=weights, max_iterations=args.steps, seed=args.seed, record_every=1),
        init_world=en.worlds[0],
        state_filter=domain.contains,
    )
    secs = time.perf_counter() - t0
    index = en.index()
    visits = np.array([index[s.world.key()] for s in trace.samples])
    print(f"{len(en.worlds)} worlds, top probability {en.probabilities.max():.4f}, {secs:.1f}s")
    checkpoints = sorted({n for n in (10**3, 10**4, 10**5, 10**6) if n < len(visits)} | {len(visits)})
    for n in checkpoints:
        counts = np.bincount(visits[:n], minlength=len(en.worlds))
        print(f"steps {n:7d}  TV {total_variation(counts / n, en.probabilities):.4f}")
    print("best world matches argmax:", trace.best_world.key() == en.argmax.key())


if __name__ == "__main__":
    main()
