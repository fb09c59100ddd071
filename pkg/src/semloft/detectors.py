"""Bottom-up detection of walls, door gaps and unit rectangles on an
axis-aligned classified map.

Walls come from run-length profiles of occupied cells per row (horizontal
walls) and per column (vertical walls). Collinear runs separated by short
gaps are merged, and runs on consecutive lines with matching extent are
grouped into one thick wall band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridmap import CellState
from .world import Unit


@dataclass(frozen=True)
class DetectorParams:
    min_span: int = 8
    min_support: float = 0.6
    merge_gap: int = 6
    gap_support_min: float = 0.6
    extent_overlap_min: float = 0.7
    top_k: int = 500
    door_bounds: tuple = (2, 8)
    band_overlap: float = 0.8
    door_wall_min: int = 20
    door_flank_min: int = 3


@dataclass(frozen=True)
class WallSegment:
    """A wall band: ``thickness`` consecutive lines starting at
    ``line_coord`` (rows for ``axis == "h"``, columns for ``"v"``)."""

    axis: str
    line_coord: int
    span: tuple
    support: float
    thickness: int = 1

    @property
    def start(self):
        return self.span[0]

    @property
    def end(self):
        return self.span[1]

    @property
    def last_line(self):
        return self.line_coord + self.thickness - 1


@dataclass(frozen=True)
class DoorCandidate:
    axis: str
    band: tuple  # first and last line of the wall band
    start: int
    end: int
    gap_support: float

    @property
    def width_cells(self):
        return self.end - self.start

    @property
    def segment(self):
        mid = (self.band[0] + self.band[1] + 1) // 2
        if self.axis == "h":
            return ((self.start, mid), (self.end, mid))
        return ((mid, self.start), (mid, self.end))


@dataclass(frozen=True)
class UnitCandidate:
    unit: Unit
    score: float
    supports: tuple = ()

    @property
    def rectangle(self):
        return self.unit.vertices


@dataclass
class Detections:
    walls: list
    doors: list
    units: list


def _runs(mask):
    """Start/end indices of True runs in a 1-D boolean array."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return edges[0::2], edges[1::2]


def _line_segments(occ_line, params):
    starts, ends = _runs(occ_line)
    if starts.size == 0:
        return []
    segs = []
    s, e = int(starts[0]), int(ends[0])
    for a, b in zip(starts[1:].tolist(), ends[1:].tolist()):
        if a - e <= params.merge_gap:
            e = b
        else:
            segs.append((s, e))
            s, e = a, b
    segs.append((s, e))
    out = []
    for s, e in segs:
        if e - s < params.min_span:
            continue
        support = float(occ_line[s:e].mean())
        if support >= params.min_support:
            out.append((s, e))
    return out


def _scan(occ, axis, params):
    bands = []  # [first, last, start, end]
    open_bands = []
    for line in range(occ.shape[0]):
        segs = _line_segments(occ[line], params)
        next_open = []
        for s, e in segs:
            joined = None
            for b in open_bands:
                inter = min(e, b[3]) - max(s, b[2])
                union = max(e, b[3]) - min(s, b[2])
                if inter > 0 and inter >= params.band_overlap * union:
                    joined = b
                    break
            if joined is not None:
                open_bands.remove(joined)
                joined[1] = line
                joined[2], joined[3] = min(s, joined[2]), max(e, joined[3])
                next_open.append(joined)
            else:
                b = [line, line, s, e]
                bands.append(b)
                next_open.append(b)
        open_bands = next_open
    out = []
    for first, last, s, e in bands:
        region = occ[first : last + 1, s:e]
        out.append(WallSegment(axis, first, (s, e), float(region.mean()), last - first + 1))
    return out


def detect_walls(map_c, params=DetectorParams()):
    occ = map_c.cells == CellState.OCCUPIED
    walls = _scan(occ, "h", params) + _scan(occ.T, "v", params)
    walls.sort(key=lambda w: (-w.support, w.axis, w.line_coord, w.span))
    return walls


def detect_doors(map_c, walls, params=DetectorParams()):
    cells = map_c.cells
    lo, hi = params.door_bounds
    out = []
    for w in walls:
        if w.end - w.start < params.door_wall_min:
            continue
        rows = slice(w.line_coord, w.last_line + 1)
        band = cells[rows, w.start : w.end] if w.axis == "h" else cells[w.start : w.end, rows].T
        occ_frac = (band == CellState.OCCUPIED).mean(axis=0)
        starts, ends = _runs(occ_frac <= 0.5)
        for s, e in zip(starts.tolist(), ends.tolist()):
            if s == 0 or e == band.shape[1]:
                continue
            if not lo <= e - s <= hi:
                continue
            fl = params.door_flank_min
            if s < fl or e + fl > band.shape[1]:
                continue
            if (occ_frac[s - fl : s] <= 0.5).any() or (occ_frac[e : e + fl] <= 0.5).any():
                continue
            support = float((band[:, s:e] == CellState.FREE).mean())
            if support >= params.gap_support_min:
                out.append(DoorCandidate(w.axis, (w.line_coord, w.last_line), w.start + s, w.start + e, support))
    out = sorted(set(out), key=lambda d: (-d.gap_support, d.axis, d.band, d.start))
    return out


def _edges(walls, axis, t):
    low, high = [], []  # unit lies above/right of the band, or below/left
    for w in walls:
        if w.axis != axis:
            continue
        r0, r1 = w.line_coord, w.last_line
        # every line of the band may be the outer face of a wall; the
        # extra offsets cover bands thinned or split by noise
        for v in sorted(set(range(r0, r1 + 1)) | {r1 + 1 - t}):
            low.append((v, w.start, w.end))
        for v in sorted(set(range(r0 + 1, r1 + 2)) | {r0 + t}):
            high.append((v, w.start, w.end))
    return np.array(low, dtype=np.int64).reshape(-1, 3), np.array(high, dtype=np.int64).reshape(-1, 3)


def _edge_pairs(low, high, min_side):
    if low.size == 0 or high.size == 0:
        return np.zeros((0, 6), dtype=np.int64)
    a = np.repeat(low, high.shape[0], axis=0)
    b = np.tile(high, (low.shape[0], 1))
    keep = b[:, 0] - a[:, 0] >= min_side
    # columns: lo coord, hi coord, lo-edge span, hi-edge span
    return np.concatenate([a[keep, :1], b[keep, :1], a[keep, 1:], b[keep, 1:]], axis=1)


def _cover(s, e, lo, hi):
    return np.clip(np.minimum(e, hi) - np.maximum(s, lo), 0, None)


def _sat(mask):
    s = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    s[1:, 1:] = mask.cumsum(0).cumsum(1)
    return s


def _box(sat, x0, y0, x1, y1):
    x1 = np.maximum(x1, x0)
    y1 = np.maximum(y1, y0)
    return sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]


def propose_units(map_c, walls, params=DetectorParams(), wall_thickness=2, min_side=5):
    """Rectangles bounded by detected walls, best first.

    The score multiplies the occupied fraction of each of the four wall
    bands of the rectangle with the free fraction of its interior.
    """
    t = wall_thickness
    hp = _edge_pairs(*_edges(walls, "h", t), min_side)
    vp = _edge_pairs(*_edges(walls, "v", t), min_side)
    if hp.size == 0 or vp.size == 0:
        return []
    y0, y1 = hp[:, 0][:, None], hp[:, 1][:, None]
    x0, x1 = vp[:, 0][None, :], vp[:, 1][None, :]
    ov = params.extent_overlap_min
    w, h = x1 - x0, y1 - y0
    ok = _cover(hp[:, 2][:, None], hp[:, 3][:, None], x0, x1) >= ov * w
    ok &= _cover(hp[:, 4][:, None], hp[:, 5][:, None], x0, x1) >= ov * w
    ok &= _cover(vp[:, 2][None, :], vp[:, 3][None, :], y0, y1) >= ov * h
    ok &= _cover(vp[:, 4][None, :], vp[:, 5][None, :], y0, y1) >= ov * h
    hi, vi = np.nonzero(ok)
    if hi.size == 0:
        return []
    rects = np.unique(np.stack([vp[vi, 0], hp[hi, 0], vp[vi, 1], hp[hi, 1]], axis=1), axis=0)
    X0, Y0, X1, Y1 = rects.T
    occ = _sat(map_c.cells == CellState.OCCUPIED)
    free = _sat(map_c.cells == CellState.FREE)
    W, H = X1 - X0, Y1 - Y0
    sides = np.stack(
        [
            _box(occ, X0, Y0, X1, Y0 + t) / (W * t),
            _box(occ, X0, Y1 - t, X1, Y1) / (W * t),
            _box(occ, X0, Y0, X0 + t, Y1) / (H * t),
            _box(occ, X1 - t, Y0, X1, Y1) / (H * t),
        ],
        axis=1,
    )
    inner = np.maximum((W - 2 * t) * (H - 2 * t), 1)
    interior = _box(free, X0 + t, Y0 + t, X1 - t, Y1 - t) / inner
    score = sides.prod(axis=1) * interior
    keep = (sides >= params.min_support).all(axis=1) & (score > 0)
    idx = np.flatnonzero(keep)
    idx = idx[np.lexsort((Y1[idx], X1[idx], Y0[idx], X0[idx], -score[idx]))][: params.top_k]
    return [
        UnitCandidate(
            Unit(int(X0[i]), int(Y0[i]), int(X1[i]), int(Y1[i])),
            float(score[i]),
            tuple(float(s) for s in sides[i]),
        )
        for i in idx
    ]


def detect_all(map_c, params=DetectorParams(), wall_thickness=2, min_side=5):
    walls = detect_walls(map_c, params)
    doors = detect_doors(map_c, walls, params)
    units = propose_units(map_c, walls, params, wall_thickness, min_side)
    return Detections(walls, doors, units)
