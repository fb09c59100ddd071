"""Occupancy grid maps: PGM I/O, 3-state classification, orientation
alignment and synthetic map generation.

Cells are stored as 2-D numpy arrays indexed ``[y, x]`` (row-major, row 0
is the first image row). Intensities follow the image convention: 0 is dark
(occupied), 1 is bright (free).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateInputError, FormatError, GeometryError, InputIOError, ParseError

DEFAULT_RESOLUTION = 0.05


class CellState(enum.IntEnum):
    FREE = 0
    UNKNOWN = 1
    OCCUPIED = 2


# canonical intensity per CellState code
CANONICAL_INTENSITY = np.array([1.0, 0.5, 0.0])


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    cells: np.ndarray
    resolution: Optional[float] = None

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2:
            raise FormatError(f"occupancy grid must be 2-D, got shape {cells.shape}")
        if cells.size and (cells.min() < 0.0 or cells.max() > 1.0):
            raise FormatError("occupancy intensities must lie in [0, 1]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def width(self):
        return self.cells.shape[1]

    @property
    def height(self):
        return self.cells.shape[0]

    @property
    def meters_per_cell(self):
        return DEFAULT_RESOLUTION if self.resolution is None else self.resolution

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(np.array_equal(self.cells, other.cells))


@dataclass(frozen=True, eq=False)
class ClassifiedGrid:
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8)
        if cells.ndim != 2:
            raise FormatError(f"classified grid must be 2-D, got shape {cells.shape}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def width(self):
        return self.cells.shape[1]

    @property
    def height(self):
        return self.cells.shape[0]

    @property
    def dims(self):
        return (self.width, self.height)

    def counts(self):
        """Number of Free, Unknown and Occupied cells, in CellState order."""
        return np.bincount(self.cells.ravel(), minlength=3)[:3]

    def to_intensity(self):
        return OccupancyGrid(CANONICAL_INTENSITY[self.cells])

    def __eq__(self, other):
        if not isinstance(other, ClassifiedGrid):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(np.array_equal(self.cells, other.cells))


@dataclass(frozen=True)
class ClassifyThresholds:
    h_o: float = 0.25
    h_u: float = 0.75

    def __post_init__(self):
        if not (0.0 <= self.h_o < self.h_u <= 1.0):
            raise FormatError(f"need 0 <= h_o < h_u <= 1, got h_o={self.h_o}, h_u={self.h_u}")


def _identity3():
    return np.eye(3)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Per-class confusion matrix plus furniture-like clutter.

    Row ``i`` of ``flip_rate_per_class`` is the distribution of the observed
    state given clean state ``i`` (CellState codes).
    """

    flip_rate_per_class: np.ndarray = field(default_factory=_identity3)
    speckle_seed: int = 0
    clutter_density: float = 0.0
    clutter_blob_max: int = 3

    def __post_init__(self):
        m = np.asarray(self.flip_rate_per_class, dtype=np.float64)
        if m.shape != (3, 3):
            raise FormatError("confusion matrix must be 3x3")
        if (m < 0).any() or not np.allclose(m.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise FormatError("confusion matrix rows must be non-negative and sum to 1")
        if not 0.0 <= self.clutter_density < 1.0:
            raise FormatError("clutter_density must lie in [0, 1)")
        object.__setattr__(self, "flip_rate_per_class", m)

    @classmethod
    def symmetric(cls, flip_rate, seed=0, clutter_density=0.0):
        """Every class keeps its state with probability ``1 - flip_rate``;
        the remaining mass is split evenly over the other two classes."""
        m = np.full((3, 3), flip_rate / 2.0)
        np.fill_diagonal(m, 1.0 - flip_rate)
        return cls(m, seed, clutter_density)


# ---------------------------------------------------------------- PGM I/O

_WS = b" \t\r\n\x0b\x0c"


def _header_tokens(data, count):
    """Read ``count`` whitespace-separated header tokens after the magic.

    Returns the tokens with their byte offsets and the offset just past the
    last token.
    """
    pos = 2
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise ParseError("unexpected end of header", pos)
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tok = data[start:pos]
        if not tok.isdigit():
            raise ParseError(f"malformed header field {tok!r}", start)
        tokens.append((int(tok), start))
    return tokens, pos


def parse_pgm(data, invert=False, resolution=None):
    if len(data) < 2:
        raise ParseError("file too short for a PGM magic number", 0)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"unsupported magic number {magic!r}; expected P2 or P5")
    tokens, end = _header_tokens(data, 3)
    (width, w_off), (height, h_off), (maxval, m_off) = tokens
    if width <= 0:
        raise ParseError("width must be positive", w_off)
    if height <= 0:
        raise ParseError("height must be positive", h_off)
    if not 0 < maxval <= 65535:
        raise ParseError(f"maxval {maxval} outside 1..65535", m_off)
    count = width * height
    if magic == b"P5":
        if end >= len(data) or data[end] not in _WS:
            raise ParseError("missing whitespace after maxval", end)
        start = end + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(data) - start < need:
            raise ParseError(
                f"truncated pixel data: need {need} bytes, have {len(data) - start}", len(data)
            )
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=start).astype(np.int64)
        end = start
    else:
        body = data[end:]
        body = re.sub(rb"#[^\r\n]*", b" ", body)
        fields = body.split()
        if len(fields) < count:
            raise ParseError(f"truncated pixel data: need {count} samples, have {len(fields)}", len(data))
        try:
            raw = np.array([int(f) for f in fields[:count]], dtype=np.int64)
        except ValueError as exc:
            raise ParseError(f"non-numeric sample in P2 raster: {exc}", end) from None
    if (raw > maxval).any():
        bad = int(np.argmax(raw > maxval))
        raise ParseError(f"sample {bad} exceeds maxval {maxval}", end)
    cells = raw.reshape(height, width) / float(maxval)
    if invert:
        cells = 1.0 - cells
    return OccupancyGrid(cells, resolution)


def load_pgm(path, invert=False, resolution=None):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputIOError(f"cannot read map {path}: {exc.strerror or exc}") from None
    return parse_pgm(data, invert=invert, resolution=resolution)


def encode_pgm(grid, binary=True, maxval=255):
    cells = grid.cells if isinstance(grid, OccupancyGrid) else np.asarray(grid, dtype=np.float64)
    h, w = cells.shape
    samples = np.rint(cells * maxval).astype(np.int64)
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
        dtype = ">u2" if maxval > 255 else "u1"
        return header + samples.astype(dtype).tobytes()
    lines = [f"P2\n{w} {h}\n{maxval}"]
    lines.extend(" ".join(str(v) for v in row) for row in samples)
    return ("\n".join(lines) + "\n").encode("ascii")


def write_pgm(grid, path, binary=True, maxval=255):
    data = encode_pgm(grid, binary=binary, maxval=maxval)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise InputIOError(f"cannot write {path}: {exc.strerror or exc}") from None


# ---------------------------------------------------------- classification

def classify(grid, thresholds=ClassifyThresholds()):
    m = grid.cells
    out = np.full(m.shape, CellState.FREE, dtype=np.int8)
    out[m <= thresholds.h_u] = CellState.UNKNOWN
    out[m <= thresholds.h_o] = CellState.OCCUPIED
    return ClassifiedGrid(out)


# ------------------------------------------------------------- orientation

def _rotate_points(x, y, degrees):
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    return x * c - y * s, x * s + y * c


def orientation_profile(grid, step=0.5):
    """Projection sharpness for every swept angle in [-45, 45).

    Sharpness is the sum of squared row and column histogram counts of the
    occupied cells after rotating them by the angle, divided by the squared
    number of occupied cells.
    """
    ys, xs = np.nonzero(grid.cells == CellState.OCCUPIED)
    if xs.size == 0:
        raise DegenerateInputError("map has no occupied cells; orientation undefined")
    cx, cy = grid.width / 2.0, grid.height / 2.0
    px = xs + 0.5 - cx
    py = ys + 0.5 - cy
    angles = np.arange(-45.0, 45.0, step)
    sharp = np.empty(angles.size)
    norm = float(xs.size) ** 2
    for i, a in enumerate(angles):
        rx, ry = _rotate_points(px, py, a)
        bx = np.floor(rx).astype(np.int64)
        by = np.floor(ry).astype(np.int64)
        hx = np.bincount(bx - bx.min())
        hy = np.bincount(by - by.min())
        sharp[i] = (np.dot(hx, hx) + np.dot(hy, hy)) / norm
    return angles, sharp


def dominant_orientation(grid, step=0.5):
    """Rotation (degrees) that best axis-aligns the occupied structure."""
    angles, sharp = orientation_profile(grid, step)
    best = sharp.max()
    # ties: prefer the smallest rotation
    cands = angles[sharp >= best * (1.0 - 1e-12)]
    return float(cands[np.argmin(np.abs(cands))])


def rotate_grid(grid, angle):
    """Rotate the map content by ``angle`` degrees about the map centre.

    Nearest-neighbour sampling; cells whose source falls outside the map
    get the Unknown midpoint intensity 0.5.
    """
    if abs(angle) >= 90.0:
        raise GeometryError(f"rotation angle must satisfy |angle| < 90, got {angle}")
    if angle == 0:
        return OccupancyGrid(grid.cells.copy(), grid.resolution)
    h, w = grid.cells.shape
    cx, cy = w / 2.0, h / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    sx, sy = _rotate_points(xs + 0.5 - cx, ys + 0.5 - cy, -angle)
    ix = np.floor(sx + cx).astype(np.int64)
    iy = np.floor(sy + cy).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.full((h, w), 0.5)
    out[inside] = grid.cells[iy[inside], ix[inside]]
    return OccupancyGrid(out, grid.resolution)


# --------------------------------------------------------------- synthesis

def apply_noise(clean, noise):
    """Return a noisy copy of a CellState array (deterministic in the seed)."""
    rng = np.random.default_rng(noise.speckle_seed)
    cum = np.cumsum(noise.flip_rate_per_class, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(clean.shape)
    noisy = (u[..., None] >= cum[clean]).sum(axis=-1).astype(np.int8)
    np.minimum(noisy, 2, out=noisy)
    if noise.clutter_density > 0:
        _add_clutter(clean, noisy, noise, rng)
    return noisy


def _add_clutter(clean, noisy, noise, rng):
    fy, fx = np.nonzero(clean == CellState.FREE)
    target = int(round(noise.clutter_density * fy.size))
    converted = np.zeros(clean.shape, dtype=bool)
    done = 0
    h, w = clean.shape
    while done < target:
        k = rng.integers(fy.size)
        side = int(rng.integers(1, noise.clutter_blob_max + 1))
        y0, x0 = int(fy[k]), int(fx[k])
        for y in range(y0, min(y0 + side, h)):
            for x in range(x0, min(x0 + side, w)):
                if done >= target:
                    break
                if clean[y, x] == CellState.FREE and not converted[y, x]:
                    converted[y, x] = True
                    noisy[y, x] = CellState.OCCUPIED
                    done += 1


def synth_map(world, dims, noise=NoiseModel(), wall_thickness=2, resolution=None):
    """Render a semantic world into a noisy occupancy grid."""
    from .world import WorldRasterParams, rasterize

    clean = rasterize(world, WorldRasterParams(wall_thickness, tuple(dims))).cells
    noisy = apply_noise(clean, noise)
    return OccupancyGrid(CANONICAL_INTENSITY[noisy], resolution)
