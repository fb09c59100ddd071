"""The nine reversible world-mutation kernels and their proposal accounting.

Every kernel exposes the same four operations:

* ``applicable(ctx, world)``: whether the kernel can fire at all;
* ``sample(ctx, world, rng)``: draw one discrete move and its log
  probability within the kernel;
* ``apply(ctx, world, move)``: the resulting world, or ``None`` when the
  move produces an invalid world (the step then counts it as rejected);
* ``moves(ctx, world, touched)``: enumerate moves that modify exactly the
  units in ``touched``, used to recompute transition probabilities.

Moves reference units by rectangle, never by index, because indices change
when a world is re-sorted.
"""

from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import StallError
from ..world import Door, SemanticWorld, Unit, door_is_valid, doors_conflict, facing_line

NEG_INF = -math.inf


class Kernel(str, enum.Enum):
    ADD = "add"
    REMOVE = "remove"
    SPLIT = "split"
    MERGE = "merge"
    SHRINK = "shrink"
    DILATE = "dilate"
    ALLOCATE_DOOR = "allocate_door"
    DELETE_DOOR = "delete_door"
    INTERCHANGE = "interchange"


KERNELS = tuple(Kernel)
INVERSE = {
    Kernel.ADD: Kernel.REMOVE,
    Kernel.REMOVE: Kernel.ADD,
    Kernel.SPLIT: Kernel.MERGE,
    Kernel.MERGE: Kernel.SPLIT,
    Kernel.SHRINK: Kernel.DILATE,
    Kernel.DILATE: Kernel.SHRINK,
    Kernel.ALLOCATE_DOOR: Kernel.DELETE_DOOR,
    Kernel.DELETE_DOOR: Kernel.ALLOCATE_DOOR,
    Kernel.INTERCHANGE: Kernel.INTERCHANGE,
}
DEFAULT_WEIGHTS = (0.15, 0.15, 0.1, 0.1, 0.15, 0.15, 0.075, 0.075, 0.05)


@dataclass(frozen=True)
class Proposal:
    kernel: Kernel
    new_world: SemanticWorld
    log_q_forward: float
    log_q_reverse: float
    move: tuple = ()


# ---------------------------------------------------------------- helpers

def _log(x):
    return math.log(x) if x > 0 else NEG_INF


@functools.lru_cache(maxsize=16)
def step_pmf(kp):
    """Truncated geometric distribution over displacements 1..max_step."""
    k = np.arange(1, kp.max_step + 1)
    pmf = kp.p_geo * (1.0 - kp.p_geo) ** (k - 1)
    pmf = pmf / pmf.sum()
    pmf.setflags(write=False)
    return pmf


@functools.lru_cache(maxsize=16)
def _step_cdf(kp):
    return np.cumsum(step_pmf(kp))


def _step_log_prob(kp, k):
    if not 1 <= k <= kp.max_step:
        return NEG_INF
    return math.log(step_pmf(kp)[k - 1])


def _sample_step(kp, rng):
    cdf = _step_cdf(kp)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")) + 1
    return min(k, kp.max_step)


def _cached(ctx, world, name, fn):
    return world.cached((name, id(ctx)), fn)


def _rebuild(ctx, world, units, doors):
    """World from ``units`` and doors given as ``(geometry, rect_a, rect_b)``.

    Returns ``None`` for duplicate units, new units that are out of bounds
    or undersized, and invalid or overlapping doors.
    """
    units = list(units)
    if len(set(units)) != len(units):
        return None
    w, h = ctx.dims
    m = ctx.kernel.min_side
    old = set(world.units)
    for u in units:
        if u in old:
            continue
        if u.x0 < 0 or u.y0 < 0 or u.x1 > w or u.y1 > h:
            return None
        if u.width_cells < m or u.height_cells < m:
            return None
    index = {u: i for i, u in enumerate(units)}
    out = []
    for geom, a, b in doors:
        if a not in index or b not in index:
            return None
        out.append(Door(min(index[a], index[b]), max(index[a], index[b]), *geom))
    t = ctx.t
    for d in out:
        if not door_is_valid(units, d, t, ctx.kernel.door_bounds):
            return None
    for d1, d2 in itertools.combinations(out, 2):
        if doors_conflict(d1, d2):
            return None
    return ctx.make_world(units, out)


def door_triples(world):
    return [(d.geometry, world.units[d.unit_a], world.units[d.unit_b]) for d in world.doors]


def _placements_between(ctx, a, b):
    """Door geometries supported by detected gaps on the shared wall of
    ``a`` and ``b``, mapped to their gap support."""
    f = facing_line(a, b)
    if f is None:
        return {}
    axis, line, lo, hi = f
    t = ctx.t
    blo, bhi = ctx.kernel.door_bounds
    out = {}
    for c in ctx.door_candidates[axis]:
        if c.band[0] > line + t - 1 or c.band[1] < line - t:
            continue
        if c.start < lo + t or c.end > hi - t or not blo <= c.end - c.start <= bhi:
            continue
        geom = (axis, line, c.start, c.end)
        out[geom] = max(out.get(geom, 0.0), c.gap_support)
    return out


def _free_of(geom, doors):
    axis, line, s, e = geom
    return all(not (g[0] == axis and g[1] == line and s < g[3] and g[2] < e) for g in doors)


def door_placements(ctx, world):
    """Eligible new doors of ``world``: ``(geometry, rect_a, rect_b) -> weight``."""

    def build():
        taken = [d.geometry for d in world.doors]
        out = {}
        for a, b in itertools.combinations(world.units, 2):
            for geom, wgt in _placements_between(ctx, a, b).items():
                if _free_of(geom, taken):
                    out[(geom,) + tuple(sorted((a, b)))] = wgt
        return out

    return _cached(ctx, world, "placements", build)


def unit_door_placements(ctx, world, unit):
    """Eligible doors between a unit being added and the units of ``world``."""
    taken = [d.geometry for d in world.doors]
    out = set()
    for u in world.units:
        for geom in _placements_between(ctx, unit, u):
            if _free_of(geom, taken):
                out.add((geom,) + tuple(sorted((unit, u))))
    return sorted(out)


def _abutting_pairs(world, equal_span=True):
    out = []
    for a, b in itertools.combinations(world.units, 2):
        f = facing_line(a, b)
        if f is None:
            continue
        if f[0] == "v":
            lo, hi = (a, b) if a.x1 == b.x0 else (b, a)
            if equal_span and (a.y0, a.y1) != (b.y0, b.y1):
                continue
        else:
            lo, hi = (a, b) if a.y1 == b.y0 else (b, a)
            if equal_span and (a.x0, a.x1) != (b.x0, b.x1):
                continue
        out.append((f[0], lo, hi))
    return out


def interchange_pairs(ctx, world):
    return _cached(ctx, world, "interchange", lambda: _abutting_pairs(world))


def merge_pairs(ctx, world):
    def build():
        linked = {frozenset((world.units[d.unit_a], world.units[d.unit_b])) for d in world.doors}
        return [p for p in interchange_pairs(ctx, world) if frozenset(p[1:]) not in linked]

    return _cached(ctx, world, "merge", build)


def eligible_candidates(ctx, world):
    """Detected units that may be added: not present and not substantially
    overlapping any present unit. Returns ``(units, scores)``."""

    def build():
        cands = [c for c in ctx.detections.units if c.score > 0]
        if not cands:
            return [], np.zeros(0)
        rect = np.array([c.unit.as_tuple() for c in cands], dtype=np.int64)
        keep = np.ones(len(cands), dtype=bool)
        if world.units:
            have = np.array([u.as_tuple() for u in world.units], dtype=np.int64)
            iw = np.minimum(rect[:, None, 2], have[None, :, 2]) - np.maximum(rect[:, None, 0], have[None, :, 0])
            ih = np.minimum(rect[:, None, 3], have[None, :, 3]) - np.maximum(rect[:, None, 1], have[None, :, 1])
            inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
            ca = (rect[:, 2] - rect[:, 0]) * (rect[:, 3] - rect[:, 1])
            ha = (have[:, 2] - have[:, 0]) * (have[:, 3] - have[:, 1])
            small = np.minimum(ca[:, None], ha[None, :])
            keep &= (inter <= ctx.kernel.add_overlap_max * small).all(axis=1)
            present = set(world.units)
            keep &= np.array([c.unit not in present for c in cands])
        units = [c.unit for c, k in zip(cands, keep) if k]
        scores = np.array([c.score for c, k in zip(cands, keep) if k], dtype=np.float64)
        return units, scores

    return _cached(ctx, world, "add", build)


def uniform_rect_count(ctx):
    w, h = ctx.dims
    m = ctx.kernel.min_side

    def pairs(n):
        return max(n - m + 1, 0) * max(n - m + 2, 0) // 2

    return pairs(w) * pairs(h)


def _uniform_rect(ctx, rng):
    w, h = ctx.dims
    m = ctx.kernel.min_side

    def draw(n):
        while True:
            a, b = (int(v) for v in rng.integers(0, n + 1, size=2))
            if b - a >= m:
                return a, b

    x0, x1 = draw(w)
    y0, y1 = draw(h)
    return Unit(x0, y0, x1, y1)


# ---------------------------------------------------------------- kernels

class AddKernel:
    kind = Kernel.ADD

    @staticmethod
    def _uniform_mass(ctx, world):
        units, _ = eligible_candidates(ctx, world)
        return 1.0 if not units else ctx.kernel.add_uniform

    def applicable(self, ctx, world):
        eps = self._uniform_mass(ctx, world)
        if eps < 1.0 and eligible_candidates(ctx, world)[0]:
            return True
        return eps > 0 and uniform_rect_count(ctx) > 0

    def unit_log_prob(self, ctx, world, unit):
        """Probability that the unit-choice stage picks ``unit``."""
        eps = self._uniform_mass(ctx, world)
        units, scores = eligible_candidates(ctx, world)
        p = 0.0
        if eps < 1.0:
            hits = [s for u, s in zip(units, scores) if u == unit]
            p += (1.0 - eps) * float(sum(hits)) / float(scores.sum())
        w, h = ctx.dims
        m = ctx.kernel.min_side
        in_range = 0 <= unit.x0 and 0 <= unit.y0 and unit.x1 <= w and unit.y1 <= h
        if eps > 0 and in_range and unit.width_cells >= m and unit.height_cells >= m:
            p += eps / uniform_rect_count(ctx)
        return _log(p)

    def doors_log_prob(self, ctx, world, unit, doors):
        options = unit_door_placements(ctx, world, unit)
        if not set(doors) <= set(options):
            return NEG_INF
        pa = ctx.kernel.door_attach
        return len(doors) * math.log(pa) + (len(options) - len(doors)) * math.log(1.0 - pa)

    def log_prob(self, ctx, world, move):
        unit, doors = move
        return self.unit_log_prob(ctx, world, unit) + self.doors_log_prob(ctx, world, unit, doors)

    def sample(self, ctx, world, rng):
        eps = self._uniform_mass(ctx, world)
        if rng.random() < eps:
            unit = _uniform_rect(ctx, rng)
        else:
            units, scores = eligible_candidates(ctx, world)
            cdf = np.cumsum(scores)
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            unit = units[min(i, len(units) - 1)]
        options = unit_door_placements(ctx, world, unit)
        pa = ctx.kernel.door_attach
        doors = tuple(o for o in options if rng.random() < pa)
        move = (unit, doors)
        return move, self.log_prob(ctx, world, move)

    def apply(self, ctx, world, move):
        unit, doors = move
        if unit in world.units:
            return None
        return _rebuild(ctx, world, world.units + (unit,), door_triples(world) + list(doors))

    def touched(self, move):
        return frozenset()

    def moves(self, ctx, world, touched):
        # Only the candidate branch is enumerable; the uniform branch is
        # added analytically by transition_log_prob.
        units, scores = eligible_candidates(ctx, world)
        eps = self._uniform_mass(ctx, world)
        if touched or eps >= 1.0:
            return
        total = float(scores.sum())
        pa = ctx.kernel.door_attach
        for unit, s in zip(units, scores):
            options = unit_door_placements(ctx, world, unit)
            for mask in itertools.product((False, True), repeat=len(options)):
                chosen = tuple(o for o, on in zip(options, mask) if on)
                k = len(chosen)
                lp = math.log((1.0 - eps) * s / total) + k * math.log(pa) + (len(options) - k) * math.log(1.0 - pa)
                yield (unit, chosen), lp

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        return -math.log(len(new_world.units))


class RemoveKernel:
    kind = Kernel.REMOVE

    def applicable(self, ctx, world):
        return len(world.units) > 0

    def sample(self, ctx, world, rng):
        unit = world.units[int(rng.integers(len(world.units)))]
        return (unit,), -math.log(len(world.units))

    def apply(self, ctx, world, move):
        (unit,) = move
        doors = [d for d in door_triples(world) if unit not in d[1:]]
        return _rebuild(ctx, world, [u for u in world.units if u != unit], doors)

    def touched(self, move):
        return frozenset(move)

    def moves(self, ctx, world, touched):
        for u in world.units:
            if frozenset((u,)) == touched:
                yield (u,), -math.log(len(world.units))

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        (unit,) = move
        doors = tuple(sorted(d for d in door_triples(old_world) if unit in d[1:]))
        return ADD.log_prob(ctx, new_world, (unit, doors))


def _split_parts(unit, axis, cut):
    if axis == "x":
        return Unit(unit.x0, unit.y0, cut, unit.y1), Unit(cut, unit.y0, unit.x1, unit.y1)
    return Unit(unit.x0, unit.y0, unit.x1, cut), Unit(unit.x0, cut, unit.x1, unit.y1)


def _cut_range(unit, axis, m):
    lo, hi = (unit.x0, unit.x1) if axis == "x" else (unit.y0, unit.y1)
    return lo + m, hi - m  # inclusive range of cut positions


def _door_owner(geom, parts):
    """The part whose boundary carries the door, or ``None``."""
    axis, line, s, e = geom
    for p in parts:
        if axis == "h" and line in (p.y0, p.y1) and p.x0 <= s and e <= p.x1:
            return p
        if axis == "v" and line in (p.x0, p.x1) and p.y0 <= s and e <= p.y1:
            return p
    return None


class SplitKernel:
    kind = Kernel.SPLIT

    def applicable(self, ctx, world):
        m = ctx.kernel.min_side
        return any(u.width_cells >= 2 * m or u.height_cells >= 2 * m for u in world.units)

    def log_prob(self, ctx, world, move):
        unit, axis, cut = move
        lo, hi = _cut_range(unit, axis, ctx.kernel.min_side)
        if not lo <= cut <= hi:
            return NEG_INF
        return -math.log(len(world.units)) - math.log(2.0) - math.log(hi - lo + 1)

    def sample(self, ctx, world, rng):
        unit = world.units[int(rng.integers(len(world.units)))]
        axis = "x" if rng.random() < 0.5 else "y"
        lo, hi = _cut_range(unit, axis, ctx.kernel.min_side)
        if hi < lo:
            return (unit, axis, None), NEG_INF
        cut = int(rng.integers(lo, hi + 1))
        move = (unit, axis, cut)
        return move, self.log_prob(ctx, world, move)

    def apply(self, ctx, world, move):
        unit, axis, cut = move
        if cut is None:
            return None
        parts = _split_parts(unit, axis, cut)
        units = [u for u in world.units if u != unit] + list(parts)
        doors = []
        for geom, a, b in door_triples(world):
            if unit in (a, b):
                owner = _door_owner(geom, parts)
                if owner is None:
                    return None
                a, b = (owner, b) if a == unit else (a, owner)
            doors.append((geom, a, b))
        return _rebuild(ctx, world, units, doors)

    def touched(self, move):
        return frozenset(move[:1])

    def moves(self, ctx, world, touched):
        for unit in world.units:
            if frozenset((unit,)) != touched:
                continue
            for axis in ("x", "y"):
                lo, hi = _cut_range(unit, axis, ctx.kernel.min_side)
                for cut in range(lo, hi + 1):
                    move = (unit, axis, cut)
                    yield move, self.log_prob(ctx, world, move)

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        n = len(merge_pairs(ctx, new_world))
        return -math.log(n) if n else NEG_INF


class MergeKernel:
    kind = Kernel.MERGE

    def applicable(self, ctx, world):
        return bool(merge_pairs(ctx, world))

    def sample(self, ctx, world, rng):
        pairs = merge_pairs(ctx, world)
        axis, a, b = pairs[int(rng.integers(len(pairs)))]
        return (a, b, axis), -math.log(len(pairs))

    def apply(self, ctx, world, move):
        a, b, _ = move
        merged = Unit(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))
        units = [u for u in world.units if u not in (a, b)] + [merged]
        doors = []
        for geom, p, q in door_triples(world):
            p = merged if p in (a, b) else p
            q = merged if q in (a, b) else q
            if p == q:
                return None
            doors.append((geom, p, q))
        return _rebuild(ctx, world, units, doors)

    def touched(self, move):
        return frozenset(move[:2])

    def moves(self, ctx, world, touched):
        pairs = merge_pairs(ctx, world)
        for axis, a, b in pairs:
            if frozenset((a, b)) == touched:
                yield (a, b, axis), -math.log(len(pairs))

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        a, b, axis = move
        merged = Unit(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))
        cut = a.x1 if axis == "v" else a.y1
        return SPLIT.log_prob(ctx, new_world, (merged, "x" if axis == "v" else "y", cut))


WALLS = ("left", "right", "bottom", "top")


def _move_wall(unit, wall, delta):
    """Move ``wall`` outward by ``delta`` cells (negative moves inward)."""
    x0, y0, x1, y1 = unit.as_tuple()
    if wall == "left":
        x0 -= delta
    elif wall == "right":
        x1 += delta
    elif wall == "bottom":
        y0 -= delta
    else:
        y1 += delta
    if x1 <= x0 or y1 <= y0:
        return None
    return Unit(x0, y0, x1, y1)


class _WallKernel:
    sign = 0  # +1 grows the unit, -1 shrinks it

    def log_prob(self, ctx, world, move):
        _, _, k = move
        return -math.log(len(world.units)) - math.log(4.0) + _step_log_prob(ctx.kernel, k)

    def sample(self, ctx, world, rng):
        unit = world.units[int(rng.integers(len(world.units)))]
        wall = WALLS[int(rng.integers(4))]
        move = (unit, wall, _sample_step(ctx.kernel, rng))
        return move, self.log_prob(ctx, world, move)

    def apply(self, ctx, world, move):
        unit, wall, k = move
        moved = _move_wall(unit, wall, self.sign * k)
        if moved is None:
            return None
        units = [moved if u == unit else u for u in world.units]
        doors = [(g, moved if a == unit else a, moved if b == unit else b) for g, a, b in door_triples(world)]
        return _rebuild(ctx, world, units, doors)

    def touched(self, move):
        return frozenset(move[:1])

    def moves(self, ctx, world, touched):
        for unit in world.units:
            if frozenset((unit,)) != touched:
                continue
            for wall in WALLS:
                for k in range(1, ctx.kernel.max_step + 1):
                    move = (unit, wall, k)
                    yield move, self.log_prob(ctx, world, move)

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        _, _, k = move
        return -math.log(len(new_world.units)) - math.log(4.0) + _step_log_prob(ctx.kernel, k)


class ShrinkKernel(_WallKernel):
    kind = Kernel.SHRINK
    sign = -1

    def applicable(self, ctx, world):
        m = ctx.kernel.min_side
        return any(u.width_cells > m or u.height_cells > m for u in world.units)


class DilateKernel(_WallKernel):
    kind = Kernel.DILATE
    sign = +1

    def applicable(self, ctx, world):
        w, h = ctx.dims
        return any(u.x0 > 0 or u.y0 > 0 or u.x1 < w or u.y1 < h for u in world.units)


class AllocateDoorKernel:
    kind = Kernel.ALLOCATE_DOOR

    def applicable(self, ctx, world):
        return bool(door_placements(ctx, world))

    def log_prob(self, ctx, world, triple):
        options = door_placements(ctx, world)
        if triple not in options:
            return NEG_INF
        return math.log(options[triple] / math.fsum(options.values()))

    def sample(self, ctx, world, rng):
        options = door_placements(ctx, world)
        keys = sorted(options)
        cdf = np.cumsum([options[k] for k in keys])
        i = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(keys) - 1)
        move = (keys[i],)
        return move, self.log_prob(ctx, world, keys[i])

    def apply(self, ctx, world, move):
        return _rebuild(ctx, world, world.units, door_triples(world) + [move[0]])

    def touched(self, move):
        return frozenset()

    def moves(self, ctx, world, touched):
        if touched:
            return
        for triple in sorted(door_placements(ctx, world)):
            yield (triple,), self.log_prob(ctx, world, triple)

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        return -math.log(len(new_world.doors))


class DeleteDoorKernel:
    kind = Kernel.DELETE_DOOR

    def applicable(self, ctx, world):
        return len(world.doors) > 0

    def sample(self, ctx, world, rng):
        triples = door_triples(world)
        g, a, b = triples[int(rng.integers(len(triples)))]
        return ((g,) + tuple(sorted((a, b))),), -math.log(len(triples))

    def apply(self, ctx, world, move):
        g, a, b = move[0]
        doors = [d for d in door_triples(world) if not (d[0] == g and {d[1], d[2]} == {a, b})]
        return _rebuild(ctx, world, world.units, doors)

    def touched(self, move):
        return frozenset()

    def moves(self, ctx, world, touched):
        if touched:
            return
        for g, a, b in door_triples(world):
            yield ((g,) + tuple(sorted((a, b))),), -math.log(len(world.doors))

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        return ALLOCATE_DOOR.log_prob(ctx, new_world, move[0])


class InterchangeKernel:
    kind = Kernel.INTERCHANGE

    def applicable(self, ctx, world):
        return bool(interchange_pairs(ctx, world))

    @staticmethod
    def _pair_log_prob(ctx, world, k):
        n = len(interchange_pairs(ctx, world))
        if n == 0:
            return NEG_INF
        return -math.log(n) - math.log(2.0) + _step_log_prob(ctx.kernel, k)

    def sample(self, ctx, world, rng):
        pairs = interchange_pairs(ctx, world)
        axis, lo, hi = pairs[int(rng.integers(len(pairs)))]
        k = _sample_step(ctx.kernel, rng)
        s = k if rng.random() < 0.5 else -k
        move = (lo, hi, axis, s)
        return move, self._pair_log_prob(ctx, world, k)

    def apply(self, ctx, world, move):
        lo, hi, axis, s = move
        if axis == "v":
            line = lo.x1
            a, b = _move_wall(lo, "right", s), _move_wall(hi, "left", -s)
        else:
            line = lo.y1
            a, b = _move_wall(lo, "top", s), _move_wall(hi, "bottom", -s)
        if a is None or b is None:
            return None
        units = [a if u == lo else b if u == hi else u for u in world.units]
        doors = []
        for g, p, q in door_triples(world):
            if {p, q} == {lo, hi} and g[0] == axis and g[1] == line:
                g = (g[0], g[1] + s, g[2], g[3])
            p = a if p == lo else b if p == hi else p
            q = a if q == lo else b if q == hi else q
            doors.append((g, p, q))
        return _rebuild(ctx, world, units, doors)

    def touched(self, move):
        return frozenset(move[:2])

    def moves(self, ctx, world, touched):
        for axis, lo, hi in interchange_pairs(ctx, world):
            if frozenset((lo, hi)) != touched:
                continue
            for k in range(1, ctx.kernel.max_step + 1):
                for s in (k, -k):
                    yield (lo, hi, axis, s), self._pair_log_prob(ctx, world, k)

    def reverse_log_prob(self, ctx, new_world, old_world, move):
        return self._pair_log_prob(ctx, new_world, abs(move[3]))


ADD = AddKernel()
SPLIT = SplitKernel()
ALLOCATE_DOOR = AllocateDoorKernel()
IMPLEMENTATIONS = {
    Kernel.ADD: ADD,
    Kernel.REMOVE: RemoveKernel(),
    Kernel.SPLIT: SPLIT,
    Kernel.MERGE: MergeKernel(),
    Kernel.SHRINK: ShrinkKernel(),
    Kernel.DILATE: DilateKernel(),
    Kernel.ALLOCATE_DOOR: ALLOCATE_DOOR,
    Kernel.DELETE_DOOR: DeleteDoorKernel(),
    Kernel.INTERCHANGE: InterchangeKernel(),
}


# ------------------------------------------------------------- selection

def applicable_kernels(ctx, world, weights):
    return [k for k, w in zip(KERNELS, weights) if w > 0 and IMPLEMENTATIONS[k].applicable(ctx, world)]


def selection_log_prob(ctx, world, kernel, weights):
    """log Φ(kernel | world): weights renormalized over applicable kernels."""
    live = applicable_kernels(ctx, world, weights)
    if kernel not in live:
        return NEG_INF
    w = dict(zip(KERNELS, weights))
    return math.log(w[kernel] / math.fsum(w[k] for k in live))


def select_kernel(ctx, world, weights, rng):
    live = applicable_kernels(ctx, world, weights)
    if not live:
        raise StallError("no kernel is applicable to the current world")
    w = dict(zip(KERNELS, weights))
    cdf = np.cumsum([w[k] for k in live])
    i = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(live) - 1)
    return live[i]


def propose(ctx, world, kernel, weights, rng):
    """Draw a proposal from ``kernel``; ``None`` when the move is invalid."""
    impl = IMPLEMENTATIONS[kernel]
    move, lp = impl.sample(ctx, world, rng)
    if lp == NEG_INF:
        return None
    new = impl.apply(ctx, world, move)
    if new is None:
        return None
    fwd = selection_log_prob(ctx, world, kernel, weights) + lp
    rev = selection_log_prob(ctx, new, INVERSE[kernel], weights)
    if rev > NEG_INF:
        rev += impl.reverse_log_prob(ctx, new, world, move)
    if not (math.isfinite(fwd) and math.isfinite(rev)):
        return None
    return Proposal(kernel, new, fwd, rev, move)


def inverse_move(ctx, old_world, proposal):
    """Parameters of the inverse kernel that undo ``proposal``."""
    k, m, new = proposal.kernel, proposal.move, proposal.new_world
    if k is Kernel.ADD:
        return (m[0],)
    if k is Kernel.REMOVE:
        (unit,) = m
        doors = tuple(sorted((g,) + tuple(sorted((a, b))) for g, a, b in door_triples(old_world) if unit in (a, b)))
        return (unit, doors)
    if k is Kernel.SPLIT:
        unit, axis, cut = m
        a, b = _split_parts(unit, axis, cut)
        return (a, b, "v" if axis == "x" else "h")
    if k is Kernel.MERGE:
        a, b, axis = m
        merged = Unit(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))
        return (merged, "x" if axis == "v" else "y", a.x1 if axis == "v" else a.y1)
    if k in (Kernel.SHRINK, Kernel.DILATE):
        unit, wall, step = m
        sign = IMPLEMENTATIONS[k].sign
        return (_move_wall(unit, wall, sign * step), wall, step)
    if k is Kernel.ALLOCATE_DOOR:
        g, a, b = m[0]
        return ((g,) + tuple(sorted((a, b))),)
    if k is Kernel.DELETE_DOOR:
        return m
    lo, hi, axis, step = m
    if axis == "v":
        lo, hi = _move_wall(lo, "right", step), _move_wall(hi, "left", -step)
    else:
        lo, hi = _move_wall(lo, "top", step), _move_wall(hi, "bottom", -step)
    return (lo, hi, axis, -step)


def apply_move(ctx, world, kernel, move):
    """Apply ``move`` of ``kernel`` to ``world``; ``None`` when invalid."""
    return IMPLEMENTATIONS[kernel].apply(ctx, world, move)


def transition_log_prob(ctx, world, target, kernel, weights):
    """log Q(target | world) for ``kernel``, summing every discrete path.

    Recomputed by enumeration, independently of the bookkeeping done in
    ``propose``.
    """
    impl = IMPLEMENTATIONS[kernel]
    key = target.key()
    touched = frozenset(set(world.units) - set(target.units))
    total = []
    for move, lp in impl.moves(ctx, world, touched):
        new = impl.apply(ctx, world, move)
        if new is not None and new.key() == key:
            total.append(lp)
    if kernel is Kernel.ADD:
        total.extend(_uniform_add_paths(ctx, world, target))
    if not total:
        return NEG_INF
    top = max(total)
    lsel = selection_log_prob(ctx, world, kernel, weights)
    return lsel + top + math.log(math.fsum(math.exp(v - top) for v in total))


def _uniform_add_paths(ctx, world, target):
    added = set(target.units) - set(world.units)
    eps = AddKernel._uniform_mass(ctx, world)
    if len(added) != 1 or set(world.units) - set(target.units) or eps == 0:
        return []
    (unit,) = added
    new_doors = set(door_triples(target)) - set(door_triples(world))
    new_doors = tuple(sorted((g,) + tuple(sorted((a, b))) for g, a, b in new_doors))
    lp = ADD.doors_log_prob(ctx, world, unit, new_doors)
    if lp == NEG_INF:
        return []
    return [math.log(eps / uniform_rect_count(ctx)) + lp]
