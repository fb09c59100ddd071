"""Overlay of a semantic world on its classified map.

Images are indexed colour: every pixel holds a palette index, written as
an 8-bit palette PNG (zlib + struct only) or as a grey PGM.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError, InputIOError
from .gridmap import CellState
from .world import check_bounds, door_cells, rasterize_window

# palette index -> (name, RGB)
PALETTE = (
    ("map_free", (255, 255, 255)),
    ("map_unknown", (170, 170, 170)),
    ("map_occupied", (40, 40, 40)),
    ("interior_free", (205, 225, 250)),
    ("interior_unknown", (140, 160, 190)),
    ("interior_occupied", (30, 50, 110)),
    ("wall", (215, 40, 40)),
    ("door", (30, 170, 60)),
)
INDEX = {name: i for i, (name, _) in enumerate(PALETTE)}
# grey levels for PGM output, one per palette index
GREY = (255, 170, 40, 225, 150, 70, 110, 200)


def overlay(map_c, world=None, wall_thickness=2):
    """Palette-index image with the map's own dimensions.

    Predicted walls and doors are drawn solid; predicted interiors tint the
    underlying map state so clutter stays visible.
    """
    img = map_c.cells.astype(np.uint8).copy()
    if world is None or not world.units:
        return img
    check_bounds(world, map_c.dims)
    t = wall_thickness
    states, sigma = rasterize_window(world.units, (), t, (0, 0, map_c.width, map_c.height))
    inside = (sigma > 0) & (states == CellState.FREE)
    img[inside] += INDEX["interior_free"]
    img[states == CellState.OCCUPIED] = INDEX["wall"]
    for d in world.doors:
        for x0, y0, x1, y1 in door_cells(world.units, d, t):
            img[y0:y1, x0:x1] = INDEX["door"]
    return img


def _chunk(tag, data):
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def encode_png(indices, palette=PALETTE):
    """8-bit indexed-colour PNG bytes for a 2-D array of palette indices."""
    a = np.asarray(indices)
    if a.ndim != 2 or a.size == 0:
        raise FormatError(f"image must be a non-empty 2-D array, got shape {a.shape}")
    if a.min() < 0 or a.max() >= len(palette):
        raise FormatError("pixel index outside the palette")
    h, w = a.shape
    # filter type 0 (none) in front of every scanline
    raw = np.zeros((h, w + 1), dtype=np.uint8)
    raw[:, 1:] = a
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 3, 0, 0, 0)
    plte = bytes(c for _, rgb in palette for c in rgb)
    return b"".join(
        (
            b"\x89PNG\r\n\x1a\n",
            _chunk(b"IHDR", ihdr),
            _chunk(b"PLTE", plte),
            _chunk(b"IDAT", zlib.compress(raw.tobytes(), 9)),
            _chunk(b"IEND", b""),
        )
    )


def decode_png_size(data):
    """(width, height) from a PNG header."""
    if data[:8] != b"\x89PNG\r\n\x1a\n" or data[12:16] != b"IHDR":
        raise FormatError("not a PNG file")
    return struct.unpack(">II", data[16:24])


def encode_pgm_indices(indices):
    a = np.asarray(indices)
    h, w = a.shape
    grey = np.array(GREY, dtype=np.uint8)[a]
    return f"P5\n{w} {h}\n255\n".encode("ascii") + grey.tobytes()


def write_image(indices, path, fmt=None):
    """Write ``indices`` as PNG or PGM; the format defaults to the suffix."""
    path = Path(path)
    fmt = fmt or ("pgm" if path.suffix.lower() in (".pgm", ".pnm") else "png")
    if fmt not in ("png", "pgm"):
        raise FormatError(f"unknown image format {fmt!r}")
    data = encode_png(indices) if fmt == "png" else encode_pgm_indices(indices)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise InputIOError(f"cannot write {path}: {exc.strerror or exc}") from None
