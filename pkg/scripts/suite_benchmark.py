"""Extract every environment of the synthetic suite and report recovery.

Usage: python3 scripts/suite_benchmark.py [--iters N] [--noise P] [--clutter P]
"""

import argparse

from semloft import environments
from semloft.evaluation import evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iters", type=int, default=None, help="chain iterations (default: config value)")
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--clutter", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    reports = []
    for i, env in enumerate(environments.suite()):
        r = evaluate(env, args.noise, args.clutter, noise_seed=i, seed=args.seed, iterations=args.iters)
        reports.append(r)
        print(
            f"{r.name:20s} units {r.unit_count:2d}/{r.truth_count:2d} matched {r.matched:2d} "
            f"typed {r.type_correct:2d} K {r.K:.4f} {r.seconds:6.1f}s",
            flush=True,
        )
    matched = sum(r.matched for r in reports)
    print(
        f"count ok {sum(r.count_ok for r in reports)}/{len(reports)}  "
        f"type acc {sum(r.type_correct for r in reports) / max(matched, 1):.3f}  "
        f"mean K {sum(r.K for r in reports) / len(reports):.4f}  "
        f"max time {max(r.seconds for r in reports):.1f}s"
    )


if __name__ == "__main__":
    main()
