"""Chain context and incrementally maintained posterior state."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from ..detectors import Detections
from ..gridmap import ClassifiedGrid
from ..scoring import (
    ScoringParams,
    compute_theta,
    likelihood_stats,
    log_likelihood_from_stats,
    prior_log,
    window_stats,
)
from ..world import SemanticWorld, UnitClassThresholds, classify_unit, door_cells


@dataclass(frozen=True)
class KernelParams:
    min_side: int = 5
    door_bounds: tuple = (2, 8)
    max_step: int = 32
    p_geo: float = 0.5
    add_uniform: float = 0.1  # mass of the uniform-rectangle branch of Add
    add_overlap_max: float = 0.3
    door_attach: float = 0.5

    def __post_init__(self):
        if self.min_side < 1:
            raise ValueError("min_side must be >= 1")
        if not 0.0 < self.p_geo <= 1.0:
            raise ValueError("p_geo must lie in (0, 1]")
        if self.max_step < 1:
            raise ValueError("max_step must be >= 1")
        if not 0.0 <= self.add_uniform <= 1.0:
            raise ValueError("add_uniform must lie in [0, 1]")
        if not 0.0 < self.door_attach < 1.0:
            raise ValueError("door_attach must lie in (0, 1)")
        lo, hi = self.door_bounds
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid door bounds {self.door_bounds}")


@dataclass(eq=False)
class ChainContext:
    """Everything a chain reads but never mutates."""

    map_c: ClassifiedGrid
    params: ScoringParams = field(default_factory=ScoringParams)
    detections: Detections = None
    thresholds: UnitClassThresholds = field(default_factory=UnitClassThresholds)
    kernel: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        if self.detections is None:
            self.detections = Detections([], [], [])
        self._type_cache = {}

    @property
    def dims(self):
        return self.map_c.dims

    @property
    def t(self):
        return self.params.wall_thickness

    def type_of(self, unit):
        ty = self._type_cache.get(unit)
        if ty is None:
            ty = self._type_cache[unit] = classify_unit(unit, self.thresholds)
        return ty

    def make_world(self, units, doors=()):
        units = tuple(units)
        return SemanticWorld(units, tuple(self.type_of(u) for u in units), tuple(doors))

    @functools.cached_property
    def door_candidates(self):
        by_axis = {"h": [], "v": []}
        for d in self.detections.doors:
            by_axis[d.axis].append(d)
        return by_axis

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("door_candidates", None)
        state["_type_cache"] = {}
        return state


@dataclass(frozen=True)
class ChainState:
    world: SemanticWorld
    counts: tuple
    surplus: int
    log_likelihood: float
    log_prior: float

    @property
    def log_posterior(self):
        return self.log_likelihood + self.log_prior


def _prior(ctx, world):
    return prior_log(world, compute_theta(world, ctx.params), ctx.params)


def full_state(ctx, world):
    """Score ``world`` from scratch."""
    counts, surplus = likelihood_stats(ctx.map_c, world, ctx.params)
    counts = tuple(int(c) for c in counts)
    ll = log_likelihood_from_stats(counts, surplus, ctx.params)
    return ChainState(world, counts, surplus, ll, _prior(ctx, world))


def _door_keys(world, t):
    out = {}
    for d in world.doors:
        a, b = world.units[d.unit_a], world.units[d.unit_b]
        out[(d.geometry, a, b)] = door_cells(world.units, d, t)
    return out


def changed_window(old, new, t, dims):
    """Bounding window of every cell whose prediction may differ between
    ``old`` and ``new``, or ``None`` when nothing changed."""
    rects = [u.as_tuple() for u in set(old.units) ^ set(new.units)]
    ko, kn = _door_keys(old, t), _door_keys(new, t)
    for k in ko.keys() - kn.keys():
        rects.extend(ko[k])
    for k in kn.keys() - ko.keys():
        rects.extend(kn[k])
    if not rects:
        return None
    r = np.array(rects)
    w, h = dims
    x0, y0 = max(int(r[:, 0].min()), 0), max(int(r[:, 1].min()), 0)
    x1, y1 = min(int(r[:, 2].max()), w), min(int(r[:, 3].max()), h)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1, y1)


def update_state(ctx, state, new_world):
    """Score ``new_world`` from ``state`` by recounting only the changed window."""
    t = ctx.t
    window = changed_window(state.world, new_world, t, ctx.dims)
    counts, surplus = state.counts, state.surplus
    if window is not None:
        cells = ctx.map_c.cells
        c_old, s_old = window_stats(state.world.units, state.world.doors, t, cells, window)
        c_new, s_new = window_stats(new_world.units, new_world.doors, t, cells, window)
        counts = tuple(int(a) for a in np.asarray(counts) + c_new - c_old)
        surplus = surplus + s_new - s_old
    ll = log_likelihood_from_stats(counts, surplus, ctx.params)
    return ChainState(new_world, counts, surplus, ll, _prior(ctx, new_world))
