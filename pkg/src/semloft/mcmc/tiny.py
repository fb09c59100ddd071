"""Exact posterior over a small enumerable family of single-unit worlds.

Used as an oracle for the chain: a chain restricted to the family must
reproduce this distribution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import CapacityError
from ..world import Unit
from .state import full_state

MAX_FAMILY = 10_000


@dataclass(frozen=True)
class TinyDomain:
    """All single-unit worlds whose corner coordinates range over the given
    inclusive intervals."""

    x0: tuple
    y0: tuple
    x1: tuple
    y1: tuple

    def units(self):
        ranges = [range(lo, hi + 1) for lo, hi in (self.x0, self.y0, self.x1, self.y1)]
        for x0, y0, x1, y1 in itertools.product(*ranges):
            if x1 > x0 and y1 > y0:
                yield Unit(x0, y0, x1, y1)

    def size(self):
        return math.prod(hi - lo + 1 for lo, hi in (self.x0, self.y0, self.x1, self.y1))

    def contains(self, world):
        if len(world.units) != 1 or world.doors:
            return False
        u = world.units[0]
        return all(lo <= v <= hi for v, (lo, hi) in zip(u.as_tuple(), (self.x0, self.y0, self.x1, self.y1)))


@dataclass
class Enumeration:
    worlds: list
    log_posteriors: np.ndarray
    probabilities: np.ndarray

    @property
    def argmax(self):
        return self.worlds[int(np.argmax(self.log_posteriors))]

    def index(self):
        return {w.key(): i for i, w in enumerate(self.worlds)}


def enumerate_posterior(ctx, domain, max_states=MAX_FAMILY):
    """Normalized posterior over every world of ``domain``."""
    if domain.size() > max_states:
        raise CapacityError(f"family of {domain.size()} worlds exceeds the limit of {max_states}")
    worlds = [ctx.make_world([u]) for u in domain.units()]
    logs = np.array([full_state(ctx, w).log_posterior for w in worlds])
    top = logs.max()
    weights = np.exp(logs - top)
    return Enumeration(worlds, logs, weights / weights.sum())


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
