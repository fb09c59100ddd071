"""Comparison of an extracted world against a ground-truth world."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .gridmap import NoiseModel, synth_map
from .pipeline import extract


def iou(a, b):
    inter = a.intersection_area(b)
    return inter / float(a.area_cells + b.area_cells - inter)


def match_units(pred, truth, min_iou=0.5):
    """Greedy one-to-one matching by descending IoU; returns ``(i, j)``
    index pairs into ``pred.units`` and ``truth.units``."""
    scored = sorted(
        ((iou(p, t), i, j) for i, p in enumerate(pred.units) for j, t in enumerate(truth.units)),
        key=lambda s: (-s[0], s[1], s[2]),
    )
    used_p, used_t, out = set(), set(), []
    for v, i, j in scored:
        if v < min_iou:
            break
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        out.append((i, j))
    return sorted(out)


@dataclass
class RunReport:
    name: str
    unit_count: int
    truth_count: int
    matched: int
    type_correct: int
    K: float
    seconds: float

    @property
    def count_ok(self):
        return self.unit_count == self.truth_count


def evaluate(env, noise=0.05, clutter=0.02, noise_seed=0, config=None, seed=0, iterations=None):
    """Synthesize a noisy map of ``env``, extract a world and score it."""
    grid = synth_map(env.world, env.dims, NoiseModel.symmetric(noise, seed=noise_seed, clutter_density=clutter))
    t0 = time.perf_counter()
    res = extract(grid, config, seed=seed, iterations=iterations)
    secs = time.perf_counter() - t0
    pairs = match_units(res.world, env.world)
    typed = sum(res.world.types[i] is env.world.types[j] for i, j in pairs)
    return RunReport(env.name, len(res.world.units), len(env.world.units), len(pairs), typed, float(res.metrics["K"]), secs)
