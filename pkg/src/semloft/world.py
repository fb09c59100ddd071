"""Semantic world model: typed rectangular units, doors and derived
structures (raster prediction, relations, topology).

Units are axis-aligned rectangles on the cell lattice. A unit with corner
lattice points ``(x0, y0)`` and ``(x1, y1)`` covers cells ``x0 <= x < x1``,
``y0 <= y < y1``; its walls are the bands of ``wall_thickness`` cells just
inside that boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .errors import FormatError, GeometryError
from .gridmap import CellState, ClassifiedGrid

SCHEMA = "semworld/1"


class UnitType(str, enum.Enum):
    ROOM = "room"
    CORRIDOR = "corridor"
    HALL = "hall"


class Relation(str, enum.Enum):
    ADJACENT = "adj"
    IRRELEVANT = "irr"


@dataclass(frozen=True, order=True)
class Unit:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError(f"degenerate unit {self.as_tuple()}")

    @classmethod
    def from_vertices(cls, vertices):
        pts = [tuple(int(c) for c in v) for v in vertices]
        if len(pts) != 4 or len(set(pts)) != 4:
            raise GeometryError(f"a unit needs four distinct vertices, got {vertices}")
        xs = sorted({p[0] for p in pts})
        ys = sorted({p[1] for p in pts})
        if len(xs) != 2 or len(ys) != 2 or {(x, y) for x in xs for y in ys} != set(pts):
            raise GeometryError(f"vertices {vertices} are not an axis-aligned rectangle")
        return cls(xs[0], ys[0], xs[1], ys[1])

    @property
    def vertices(self):
        # min corner first, counter-clockwise
        return ((self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1))

    @property
    def width_cells(self):
        return self.x1 - self.x0

    @property
    def height_cells(self):
        return self.y1 - self.y0

    @property
    def area_cells(self):
        return self.width_cells * self.height_cells

    @property
    def aspect_ratio(self):
        w, h = self.width_cells, self.height_cells
        return max(w, h) / min(w, h)

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def translated(self, dx, dy):
        return Unit(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def intersection_area(self, other):
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0


@dataclass(frozen=True, order=True)
class Door:
    """An opening on the boundary line shared by two facing units.

    ``axis`` is ``"h"`` for an opening in a horizontal wall (the segment
    runs along x at ``y == line``) and ``"v"`` for a vertical wall.
    """

    unit_a: int
    unit_b: int
    axis: str
    line: int
    start: int
    end: int

    def __post_init__(self):
        if self.axis not in ("h", "v"):
            raise FormatError(f"door axis must be 'h' or 'v', got {self.axis!r}")
        if self.unit_a == self.unit_b:
            raise GeometryError("a door must connect two different units")
        if self.end <= self.start:
            raise GeometryError(f"empty door segment [{self.start}, {self.end})")

    @property
    def width_cells(self):
        return self.end - self.start

    @property
    def segment(self):
        if self.axis == "h":
            return ((self.start, self.line), (self.end, self.line))
        return ((self.line, self.start), (self.line, self.end))

    @property
    def geometry(self):
        return (self.axis, self.line, self.start, self.end)

    def with_units(self, a, b):
        a, b = min(a, b), max(a, b)
        return Door(a, b, self.axis, self.line, self.start, self.end)


@dataclass(frozen=True)
class WorldRasterParams:
    wall_thickness_cells: int = 2
    dims: tuple = (0, 0)

    def __post_init__(self):
        if self.wall_thickness_cells < 1:
            raise FormatError("wall_thickness_cells must be >= 1")


@dataclass(frozen=True)
class RelationParams:
    dilation_radius: int = 3
    overlap_min_cells: int = 4
    wall_thickness_cells: int = 2


@dataclass(frozen=True)
class UnitClassThresholds:
    area_big: float = 2000.0
    ratio_big: float = 3.0

    @classmethod
    def adaptive(cls, candidate_areas, factor=2.5, ratio_big=3.0, fallback=2000.0):
        """Area threshold at ``factor`` times the median candidate area."""
        if len(candidate_areas) == 0:
            return cls(fallback, ratio_big)
        return cls(float(factor * np.median(candidate_areas)), ratio_big)


@dataclass(frozen=True)
class SemanticWorld:
    """Units with parallel types and doors.

    The unit list is kept in a canonical sorted order (doors are remapped to
    match), so two worlds holding the same units and doors compare and
    serialize identically.
    """

    units: tuple = ()
    types: tuple = ()
    doors: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        units = tuple(self.units)
        types = tuple(UnitType(t) for t in self.types)
        if len(types) != len(units):
            raise GeometryError(f"{len(units)} units but {len(types)} types")
        order = sorted(range(len(units)), key=lambda i: units[i].as_tuple())
        rank = {old: new for new, old in enumerate(order)}
        doors = []
        for d in self.doors:
            if not (0 <= d.unit_a < len(units) and 0 <= d.unit_b < len(units)):
                raise GeometryError(f"door {d} references a missing unit")
            doors.append(d.with_units(rank[d.unit_a], rank[d.unit_b]))
        object.__setattr__(self, "units", tuple(units[i] for i in order))
        object.__setattr__(self, "types", tuple(types[i] for i in order))
        object.__setattr__(self, "doors", tuple(sorted(set(doors))))

    def __len__(self):
        return len(self.units)

    def key(self):
        return (tuple(u.as_tuple() for u in self.units), self.doors)

    def index_of(self, unit):
        return self.units.index(unit)

    def doors_of(self, i):
        return [d for d in self.doors if i in (d.unit_a, d.unit_b)]

    def cached(self, name, fn):
        if name not in self._cache:
            self._cache[name] = fn()
        return self._cache[name]


def empty_world():
    return SemanticWorld()


def typed_world(units, thresholds, doors=()):
    """Build a world typing every unit with ``classify_unit``."""
    units = list(units)
    return SemanticWorld(tuple(units), tuple(classify_unit(u, thresholds) for u in units), tuple(doors))


# ----------------------------------------------------------------- doors

def door_cells(units, door, t):
    """Cell rectangles (x0, y0, x1, y1) cleared by ``door``."""
    rects = []
    for i in (door.unit_a, door.unit_b):
        u = units[i]
        if door.axis == "h":
            if u.y1 == door.line:
                rects.append((door.start, door.line - t, door.end, door.line))
            elif u.y0 == door.line:
                rects.append((door.start, door.line, door.end, door.line + t))
        else:
            if u.x1 == door.line:
                rects.append((door.line - t, door.start, door.line, door.end))
            elif u.x0 == door.line:
                rects.append((door.line, door.start, door.line + t, door.end))
    return rects


def facing_line(a, b):
    """Shared boundary of two units that face each other across a line.

    Returns ``(axis, line, lo, hi)`` with ``[lo, hi)`` the common extent
    along the line, or ``None`` when the units do not abut.
    """
    if a.y1 == b.y0 or b.y1 == a.y0:
        line = a.y1 if a.y1 == b.y0 else a.y0
        lo, hi = max(a.x0, b.x0), min(a.x1, b.x1)
        if hi > lo:
            return ("h", line, lo, hi)
    if a.x1 == b.x0 or b.x1 == a.x0:
        line = a.x1 if a.x1 == b.x0 else a.x0
        lo, hi = max(a.y0, b.y0), min(a.y1, b.y1)
        if hi > lo:
            return ("v", line, lo, hi)
    return None


def door_is_valid(units, door, t, bounds=None):
    if door.unit_a >= len(units) or door.unit_b >= len(units):
        return False
    f = facing_line(units[door.unit_a], units[door.unit_b])
    if f is None or f[0] != door.axis or f[1] != door.line:
        return False
    if door.start < f[2] + t or door.end > f[3] - t:
        return False
    if bounds is not None and not bounds[0] <= door.width_cells <= bounds[1]:
        return False
    return True


def doors_conflict(d1, d2):
    return d1.axis == d2.axis and d1.line == d2.line and d1.start < d2.end and d2.start < d1.end


# ------------------------------------------------------------ rasterize

def rasterize_window(units, doors, t, window):
    """Predicted cell states and unit-count field over a window.

    ``window`` is ``(x0, y0, x1, y1)``; returns ``(states, sigma)`` arrays
    of the window's shape. Precedence: door > wall > free interior > unknown.
    """
    wx0, wy0, wx1, wy1 = window
    shape = (wy1 - wy0, wx1 - wx0)
    states = np.full(shape, CellState.UNKNOWN, dtype=np.int8)
    sigma = np.zeros(shape, dtype=np.int16)
    hits = [u for u in units if u.x0 < wx1 and u.x1 > wx0 and u.y0 < wy1 and u.y1 > wy0]
    if not hits:
        return states, sigma

    def sl(x0, y0, x1, y1):
        x0, x1 = max(x0, wx0), min(x1, wx1)
        y0, y1 = max(y0, wy0), min(y1, wy1)
        if x1 <= x0 or y1 <= y0:
            return None
        return (slice(y0 - wy0, y1 - wy0), slice(x0 - wx0, x1 - wx0))

    for u in hits:
        s = sl(u.x0, u.y0, u.x1, u.y1)
        sigma[s] += 1
        s = sl(u.x0 + t, u.y0 + t, u.x1 - t, u.y1 - t)
        if s is not None:
            states[s] = CellState.FREE
    for u in hits:
        for rect in (
            (u.x0, u.y0, u.x1, u.y0 + t),
            (u.x0, u.y1 - t, u.x1, u.y1),
            (u.x0, u.y0, u.x0 + t, u.y1),
            (u.x1 - t, u.y0, u.x1, u.y1),
        ):
            s = sl(*rect)
            if s is not None:
                states[s] = CellState.OCCUPIED
    for d in doors:
        for rect in door_cells(units, d, t):
            s = sl(*rect)
            if s is not None:
                states[s] = CellState.FREE
    return states, sigma


def check_bounds(world, dims):
    w, h = dims
    for i, u in enumerate(world.units):
        if u.x0 < 0 or u.y0 < 0 or u.x1 > w or u.y1 > h:
            raise GeometryError(f"unit {i} {u.as_tuple()} exceeds map bounds {w}x{h}")


def rasterize(world, params):
    w, h = params.dims
    check_bounds(world, params.dims)
    states, _ = rasterize_window(world.units, world.doors, params.wall_thickness_cells, (0, 0, w, h))
    return ClassifiedGrid(states)


def overlap_count_field(world, dims):
    """Number of units whose rectangle contains each cell."""
    w, h = dims
    check_bounds(world, dims)
    _, sigma = rasterize_window(world.units, (), 1, (0, 0, w, h))
    return sigma.astype(np.int64)


# ------------------------------------------------------------- relations

@dataclass(frozen=True, eq=False)
class RelationMatrix:
    adjacent: np.ndarray

    @property
    def n(self):
        return self.adjacent.shape[0]

    def __getitem__(self, pq):
        return Relation.ADJACENT if self.adjacent[pq] else Relation.IRRELEVANT

    def entries(self):
        return [[self[p, q] for q in range(self.n)] for p in range(self.n)]

    def pairs(self):
        p, q = np.nonzero(np.triu(self.adjacent, 1))
        return list(zip(p.tolist(), q.tolist()))

    def key(self):
        return self.adjacent.tobytes()

    def __eq__(self, other):
        return isinstance(other, RelationMatrix) and np.array_equal(self.adjacent, other.adjacent)


def _rect_inter(a, b):
    return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))


def _area(r):
    w, h = r[2] - r[0], r[3] - r[1]
    return w * h if w > 0 and h > 0 else 0


def dilated_wall_overlap(a, b, radius, t):
    """Cells shared by the dilated wall rings of two units.

    The union of a unit's four dilated wall bands is its rectangle grown by
    ``radius`` minus the interior shrunk by ``t + radius``, so the overlap
    follows from rectangle inclusion-exclusion.
    """
    oa = (a.x0 - radius, a.y0 - radius, a.x1 + radius, a.y1 + radius)
    ob = (b.x0 - radius, b.y0 - radius, b.x1 + radius, b.y1 + radius)
    o = _rect_inter(oa, ob)
    if _area(o) == 0:
        return 0
    k = t + radius
    ha = (a.x0 + k, a.y0 + k, a.x1 - k, a.y1 - k)
    hb = (b.x0 + k, b.y0 + k, b.x1 - k, b.y1 - k)
    oha = _rect_inter(o, ha)
    return _area(o) - _area(oha) - _area(_rect_inter(o, hb)) + _area(_rect_inter(oha, hb))


def detect_relations(world, params=RelationParams()):
    n = len(world.units)
    adj = np.zeros((n, n), dtype=bool)
    for p in range(n):
        for q in range(p + 1, n):
            ov = dilated_wall_overlap(world.units[p], world.units[q], params.dilation_radius, params.wall_thickness_cells)
            if ov >= params.overlap_min_cells:
                adj[p, q] = adj[q, p] = True
    return RelationMatrix(adj)


def relations_of(world, params=RelationParams()):
    return world.cached(("relations", params), lambda: detect_relations(world, params))


# ----------------------------------------------------------------- types

def classify_unit(unit, thresholds=UnitClassThresholds()):
    if unit.area_cells >= thresholds.area_big:
        return UnitType.HALL
    if unit.aspect_ratio >= thresholds.ratio_big:
        return UnitType.CORRIDOR
    return UnitType.ROOM


# -------------------------------------------------------------- topology

def topology_graph(world, relations=None):
    """Scene graph: ``kind`` is ``"door"`` for door-connected pairs and
    ``"adjacent"`` for neighbouring units without a door."""
    if relations is None:
        relations = relations_of(world)
    g = nx.Graph()
    for i, (u, t) in enumerate(zip(world.units, world.types)):
        g.add_node(i, type=t.value, vertices=u.vertices)
    for d in world.doors:
        g.add_edge(d.unit_a, d.unit_b, kind="door")
    for p, q in relations.pairs():
        if not g.has_edge(p, q):
            g.add_edge(p, q, kind="adjacent")
    return g


# -------------------------------------------------------- neighbour walls

def _walls(u):
    # (axis, side, line, lo, hi); side +1 means the unit lies on the high side
    return (
        ("v", +1, u.x0, u.y0, u.y1),
        ("v", -1, u.x1, u.y0, u.y1),
        ("h", +1, u.y0, u.x0, u.x1),
        ("h", -1, u.y1, u.x0, u.x1),
    )


def neighbour_walls(a, b):
    """Lengths of the facing walls of two units.

    Among opposite-facing wall pairs the one with the smallest distance
    between supporting lines wins; ties go to the longer overlap of the
    walls' projections. Returns ``(len_a, len_b)``.
    """
    best = None
    for wa in _walls(a):
        for wb in _walls(b):
            if wa[0] != wb[0] or wa[1] == wb[1]:
                continue
            dist = abs(wa[2] - wb[2])
            overlap = min(wa[4], wb[4]) - max(wa[3], wb[3])
            rank = (dist, -overlap)
            if best is None or rank < best[0]:
                best = (rank, wa[4] - wa[3], wb[4] - wb[3])
    return best[1], best[2]


# ------------------------------------------------------------------ JSON

def world_to_dict(world, relations=None, theta=None, dims=None, extra=None):
    out = {
        "schema": SCHEMA,
        "units": [[list(v) for v in u.vertices] for u in world.units],
        "types": [t.value for t in world.types],
        "doors": [
            {"units": [d.unit_a, d.unit_b], "segment": [list(p) for p in d.segment]}
            for d in world.doors
        ],
    }
    if dims is not None:
        out["dims"] = list(dims)
    if relations is not None:
        out["relations"] = [r.value for row in relations.entries() for r in row]
    if theta is not None:
        out["theta"] = [bool(v) for v in np.asarray(theta.values).ravel()]
    if extra:
        out.update(extra)
    return out


def world_from_dict(data):
    if data.get("schema") != SCHEMA:
        raise FormatError(f"unsupported world schema {data.get('schema')!r}; expected {SCHEMA!r}")
    try:
        units = [Unit.from_vertices(v) for v in data["units"]]
        types = [UnitType(t) for t in data["types"]]
        doors = []
        for d in data.get("doors", []):
            (ax, ay), (bx, by) = d["segment"]
            a, b = d["units"]
            if ay == by:
                doors.append(Door(a, b, "h", ay, min(ax, bx), max(ax, bx)))
            elif ax == bx:
                doors.append(Door(a, b, "v", ax, min(ay, by), max(ay, by)))
            else:
                raise GeometryError(f"door segment {d['segment']} is not axis-aligned")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed world JSON: {exc}") from None
    # doors index the units as listed in the file, before canonical sorting
    return SemanticWorld(tuple(units), tuple(types), tuple(doors))
