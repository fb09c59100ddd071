"""Synthetic indoor layouts used for evaluation.

Five layout families (hall with satellite rooms, rooms in a row along a
corridor, office double row, exhibition halls, mixed), each in two
variants, on a 400 x 300 cell canvas. Units abut along shared walls and
doors sit in the middle of shared boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GeometryError
from .world import Door, SemanticWorld, Unit, UnitType, facing_line

R, C, H = UnitType.ROOM, UnitType.CORRIDOR, UnitType.HALL
DIMS = (400, 300)


@dataclass(frozen=True)
class Environment:
    name: str
    world: SemanticWorld
    dims: tuple = DIMS


def door_between(units, i, j, width, frac=0.5, t=2):
    f = facing_line(units[i], units[j])
    if f is None:
        raise GeometryError(f"units {i} and {j} do not share a wall")
    axis, line, lo, hi = f
    start = int(round(lo + frac * (hi - lo))) - width // 2
    start = min(max(start, lo + t), hi - t - width)
    return Door(i, j, axis, line, start, start + width)


def build(name, layout, doors, dims=DIMS):
    units = [Unit(*r) for r, _ in layout]
    types = [t for _, t in layout]
    ds = [door_between(units, i, j, w) for i, j, w in doors]
    return Environment(name, SemanticWorld(tuple(units), tuple(types), tuple(ds)), dims)


def _shift(layout, dx, dy):
    return [((x0 + dx, y0 + dy, x1 + dx, y1 + dy), t) for (x0, y0, x1, y1), t in layout]


def hall_with_rooms(variant=0):
    dx, dy = (0, 0) if variant == 0 else (-14, 8)
    rw = 53 if variant == 0 else 48
    hx0, hx1 = 120, 120 + 3 * rw + 1
    layout = [
        ((hx0, 90, hx1, 210), H),
        ((hx0, 210, hx0 + rw, 262), R),
        ((hx0 + rw, 210, hx0 + 2 * rw, 262), R),
        ((hx0 + 2 * rw, 210, hx1, 262), R),
        ((66, 90, hx0, 150), R),
        ((66, 150, hx0, 210), R),
        ((hx1, 110, hx1 + 52, 170), R),
    ]
    doors = [(0, 1, 5), (0, 2, 4), (0, 3, 6), (0, 4, 5), (0, 5, 4), (0, 6, 5), (1, 2, 4)]
    return build(f"hall_with_rooms_{variant}", _shift(layout, dx, dy), doors)


def rooms_in_a_row(variant=0):
    n = 5 if variant == 0 else 6
    rw = 62 if variant == 0 else 52
    x0 = 40
    cy0, cy1 = 120, 144
    layout = [((x0, cy0, x0 + n * rw, cy1), C)]
    for k in range(n):
        layout.append(((x0 + k * rw, cy1, x0 + (k + 1) * rw, cy1 + 56), R))
    doors = [(0, k + 1, 4 + k % 3) for k in range(n)]
    return build(f"rooms_in_a_row_{variant}", layout, doors)


def office_double_row(variant=0):
    n = 5 if variant == 0 else 4
    rw = 60 if variant == 0 else 72
    x0 = 50 if variant == 0 else 56
    cy0, cy1 = 130, 154
    layout = [((x0, cy0, x0 + n * rw, cy1), C)]
    for k in range(n):
        layout.append(((x0 + k * rw, cy1, x0 + (k + 1) * rw, cy1 + 54), R))
    for k in range(n):
        layout.append(((x0 + k * rw, cy0 - 54, x0 + (k + 1) * rw, cy0), R))
    doors = [(0, k + 1, 4) for k in range(n)] + [(0, n + k + 1, 5) for k in range(n)]
    return build(f"office_double_row_{variant}", layout, doors)


def exhibition_halls(variant=0):
    hw = 140 if variant == 0 else 130
    x0 = 60
    layout = [
        ((x0, 80, x0 + hw, 220), H),
        ((x0 + hw, 80, x0 + 2 * hw, 200), H),
        ((x0, 56, x0 + 2 * hw, 80), C),
    ]
    rooms = 4
    rw = hw // rooms
    for k in range(rooms):
        layout.append(((x0 + hw + k * rw, 200, x0 + hw + (k + 1) * rw, 246), R))
    layout.append(((x0 + 2 * hw, 120, x0 + 2 * hw + 44, 170), R))
    doors = [(0, 1, 6), (0, 2, 6), (1, 2, 6)] + [(1, 3 + k, 4) for k in range(rooms)] + [(1, 3 + rooms, 4)]
    return build(f"exhibition_halls_{variant}", layout, doors)


def mixed(variant=0):
    dy = 0 if variant == 0 else 10
    layout = [
        ((40, 120 + dy, 250, 144 + dy), C),
        ((250, 70 + dy, 370, 200 + dy), H),
        ((40, 144 + dy, 100, 200 + dy), R),
        ((100, 144 + dy, 160, 200 + dy), R),
        ((160, 144 + dy, 250, 200 + dy), R),
        ((60, 70 + dy, 130, 120 + dy), R),
        ((130, 70 + dy, 200, 120 + dy), R),
    ]
    doors = [(0, 1, 6), (0, 2, 4), (0, 3, 4), (0, 4, 5), (0, 5, 4), (0, 6, 4), (2, 3, 4)]
    return build(f"mixed_{variant}", layout, doors)


LAYOUTS = (hall_with_rooms, rooms_in_a_row, office_double_row, exhibition_halls, mixed)


def suite():
    """The ten evaluation environments."""
    return [layout(v) for layout in LAYOUTS for v in (0, 1)]


def two_rooms(dims=(120, 80), height=40):
    """Two equally tall rooms sharing one wall, with a door."""
    layout = [((20, 20, 60, 20 + height), R), ((60, 20, 100, 20 + height), R)]
    return build("two_rooms", layout, [(0, 1, 4)], dims)


@dataclass(frozen=True)
class KnowledgeFixture:
    """Two side-by-side rooms of equal height whose right room has an
    uninformative top: over the band ``ambiguous_rows`` every row scores the
    same whether it is predicted wall, interior or outside, so the data
    cannot tell where that room ends."""

    map_c: object
    truth: SemanticWorld
    ambiguous_rows: tuple
    right: Unit


def knowledge_fixture(t=2):
    import numpy as np

    from .gridmap import CellState, ClassifiedGrid
    from .world import WorldRasterParams, rasterize

    dims = (110, 84)
    left, right = Unit(10, 10, 50, 60), Unit(50, 10, 92, 60)
    truth = SemanticWorld((left, right), (R, R), ())
    cells = rasterize(truth, WorldRasterParams(t, dims)).cells.copy()
    lo, hi = 36, 76
    # Per band row, the wall columns are Unknown and the interior holds
    # equally many Free and Occupied cells with Unknown filling the rest, so
    # predicting the row as top wall, as interior (with its two wall
    # columns) or as outside matches the same number of cells. The row
    # sequence is rolled from row to row to avoid long vertical runs.
    inner = right.width_cells - 2 * t
    n_u = inner - 2 * ((inner + 2 * t) // 3)
    seq = np.array([CellState.FREE, CellState.OCCUPIED] * ((inner - n_u) // 2), dtype=np.int8)
    at = np.round(np.arange(n_u) * inner / n_u).astype(int)
    seq = np.insert(seq, at - np.arange(n_u), CellState.UNKNOWN)
    for y in range(lo, hi):
        cells[y, right.x0 : right.x1] = CellState.UNKNOWN
        cells[y, right.x0 + t : right.x1 - t] = np.roll(seq, 7 * y)
    return KnowledgeFixture(ClassifiedGrid(cells), truth, (lo, hi), right)
