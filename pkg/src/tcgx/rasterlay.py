"""Monochrome raster underlays: placement, tiles, stitching, segment fitting.

Pixels are stored packed, eight to a byte, most significant bit first (the
PBM P4 convention).  A set bit is ink.  Pixel (col, row) covers the paper
square ``[x0 + col*p, x0 + (col+1)*p] x [y0 - (row+1)*p, y0 - row*p]`` where
``(x0, y0)`` is the placement origin and ``p = 25.4 / dpi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DpiMismatch, FormatError, NoInk

TILE_SIZE = 256
MIN_DPI, MAX_DPI = 75, 300


@dataclass
class MonoRaster:
    width: int
    height: int
    dpi: int
    bits: np.ndarray  # uint8, shape (height, ceil(width / 8))
    origin: tuple = (0.0, 0.0)
    _tiles: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not MIN_DPI <= self.dpi <= MAX_DPI:
            raise ValueError(f"dpi {self.dpi} outside {MIN_DPI}..{MAX_DPI}")
        stride = (self.width + 7) // 8
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.height, stride):
            raise ValueError(f"bitmap shape {self.bits.shape} != {(self.height, stride)}")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.bits.flags.writeable = False

    @classmethod
    def from_pixels(cls, pix, dpi, origin=(0.0, 0.0)) -> "MonoRaster":
        pix = np.asarray(pix, dtype=bool)
        h, w = pix.shape
        return cls(w, h, dpi, np.packbits(pix, axis=1).reshape(h, (w + 7) // 8), origin)

    @property
    def pitch(self) -> float:
        return 25.4 / self.dpi

    @property
    def nbytes(self) -> int:
        return self.bits.size

    def pixels(self) -> np.ndarray:
        """Unpacked boolean image, shape (height, width)."""
        return np.unpackbits(self.bits, axis=1, count=self.width).astype(bool)

    def rect(self):
        x0, y0 = self.origin
        return (x0, y0 - self.height * self.pitch, x0 + self.width * self.pitch, y0)

    def pixel_center(self, col, row):
        p = self.pitch
        return (self.origin[0] + (col + 0.5) * p, self.origin[1] - (row + 0.5) * p)

    def tiles(self) -> dict:
        if self._tiles is None:
            self._tiles = build_tiles(self)
        return self._tiles


@dataclass(frozen=True)
class Tile:
    col: int  # first pixel column
    row: int  # first pixel row
    pixels: np.ndarray  # bool, at most TILE_SIZE square

    @property
    def key(self):
        return (self.col // TILE_SIZE, self.row // TILE_SIZE)


def build_tiles(r: MonoRaster, tile_size: int = TILE_SIZE) -> dict:
    """Index of the non-empty tiles keyed by (tile column, tile row)."""
    pix = r.pixels()
    out = {}
    for ty in range(0, r.height, tile_size):
        for tx in range(0, r.width, tile_size):
            block = pix[ty:ty + tile_size, tx:tx + tile_size]
            if block.any():
                out[(tx // tile_size, ty // tile_size)] = Tile(tx, ty, block.copy())
    return out


def window_pixel_range(r: MonoRaster, window) -> tuple[int, int, int, int]:
    """Half-open pixel range ``(c0, c1, r0, r1)`` of pixels whose square
    overlaps ``window = (x0, y0, x1, y1)`` with positive area."""
    wx0, wy0, wx1, wy1 = window
    if not (wx1 > wx0 and wy1 > wy0):
        return (0, 0, 0, 0)
    p = r.pitch
    u0, u1 = (wx0 - r.origin[0]) / p, (wx1 - r.origin[0]) / p
    v0, v1 = (r.origin[1] - wy1) / p, (r.origin[1] - wy0) / p
    c0 = max(0, math.floor(u0))
    c1 = min(r.width, math.ceil(u1))
    r0 = max(0, math.floor(v0))
    r1 = min(r.height, math.ceil(v1))
    if c1 <= c0 or r1 <= r0:
        return (0, 0, 0, 0)
    return (c0, c1, r0, r1)


def query_region(r: MonoRaster, window) -> list[Tile]:
    """Non-empty tiles meeting the window; tiles off-window are not visited."""
    c0, c1, r0, r1 = window_pixel_range(r, window)
    if c1 <= c0:
        return []
    index = r.tiles()
    out = []
    for ty in range(r0 // TILE_SIZE, (r1 - 1) // TILE_SIZE + 1):
        for tx in range(c0 // TILE_SIZE, (c1 - 1) // TILE_SIZE + 1):
            t = index.get((tx, ty))
            if t is not None:
                out.append(t)
    return out


def render_window(r: MonoRaster, window) -> tuple[tuple[int, int], np.ndarray]:
    """Clip of the whole raster to the window: ((col, row), pixels)."""
    c0, c1, r0, r1 = window_pixel_range(r, window)
    return (c0, r0), r.pixels()[r0:r1, c0:c1]


def render_tiles(r: MonoRaster, window) -> tuple[tuple[int, int], np.ndarray]:
    """Same clip as :func:`render_window`, composited from queried tiles."""
    c0, c1, r0, r1 = window_pixel_range(r, window)
    out = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    for t in query_region(r, window):
        th, tw = t.pixels.shape
        # intersection of tile and window in raster pixel coordinates
        xa, xb = max(c0, t.col), min(c1, t.col + tw)
        ya, yb = max(r0, t.row), min(r1, t.row + th)
        if xb > xa and yb > ya:
            out[ya - r0:yb - r0, xa - c0:xb - c0] = t.pixels[ya - t.row:yb - t.row, xa - t.col:xb - t.col]
    return (c0, r0), out


def stitch(a: MonoRaster, b: MonoRaster, offset) -> MonoRaster:
    """Union of two rasters, ``b`` displaced by ``offset`` pixels (dx right,
    dy down) relative to ``a``; overlapping ink is OR-ed."""
    if a.dpi != b.dpi:
        raise DpiMismatch(f"cannot stitch {a.dpi} dpi with {b.dpi} dpi")
    dx, dy = int(offset[0]), int(offset[1])
    left, top = min(0, dx), min(0, dy)
    right, bottom = max(a.width, dx + b.width), max(a.height, dy + b.height)
    pix = np.zeros((bottom - top, right - left), dtype=bool)
    pix[-top:-top + a.height, -left:-left + a.width] |= a.pixels()
    pix[dy - top:dy - top + b.height, dx - left:dx - left + b.width] |= b.pixels()
    p = a.pitch
    origin = (a.origin[0] + left * p, a.origin[1] - top * p)
    return MonoRaster.from_pixels(pix, a.dpi, origin)


# ------------------------------------------------------------------ fitting

@dataclass(frozen=True)
class SegmentFit:
    p1: tuple
    p2: tuple
    rms: float  # perpendicular residual, mm
    n_pixels: int
    low_confidence: bool


def fit_segment(r: MonoRaster, approx, corridor: float) -> SegmentFit:
    """Fit a segment to ink near an approximate segment.

    Ink pixels whose centres lie within ``corridor`` mm of ``approx`` (a
    capsule) give the line by total least squares.  The stroke is then
    modelled as a round-capped band of half-width ``h`` around that line and
    each endpoint is placed mid-way through the interval of positions that
    reproduce the ink at that end: far enough to reach every inked pixel,
    short of the first blank pixel the band would have covered.
    """
    if corridor <= 0:
        raise ValueError("corridor must be positive")
    (ax, ay), (bx, by) = (approx[0], approx[1]), (approx[2], approx[3])
    p = r.pitch
    box = (min(ax, bx) - corridor, min(ay, by) - corridor,
           max(ax, bx) + corridor, max(ay, by) + corridor)
    (c0, r0), block = render_window(r, box)
    rows, cols = np.indices(block.shape)
    xs = r.origin[0] + (cols + c0 + 0.5) * p
    ys = r.origin[1] - (rows + r0 + 0.5) * p

    d = np.array([bx - ax, by - ay], dtype=float)
    dl = math.hypot(*d)
    if dl == 0:
        dist = np.hypot(xs - ax, ys - ay)
    else:
        t = np.clip(((xs - ax) * d[0] + (ys - ay) * d[1]) / dl**2, 0.0, 1.0)
        dist = np.hypot(xs - (ax + t * d[0]), ys - (ay + t * d[1]))
    inside = dist <= corridor
    ink = block[inside]
    if not ink.any():
        raise NoInk("no ink inside the corridor")
    cand = np.column_stack([xs[inside], ys[inside]])
    pts = cand[ink]

    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    direction = vt[0]
    if dl > 0 and direction @ d < 0:
        direction = -direction
    normal = np.array([-direction[1], direction[0]])
    along = (cand - centroid) @ direction
    off = (cand - centroid) @ normal
    rms = float(np.sqrt(np.mean(off[ink] ** 2)))
    off = np.abs(off)

    a_ink, o_ink = along[ink], off[ink]
    a_gap, o_gap = along[~ink], off[~ink]
    half = _stroke_half_width(a_ink, o_ink, a_gap, o_gap, p)
    hi = _end_position(a_ink, o_ink, a_gap, o_gap, half, p)
    lo = -_end_position(-a_ink, o_ink, -a_gap, o_gap, half, p)
    q1 = centroid + lo * direction
    q2 = centroid + hi * direction
    return SegmentFit((float(q1[0]), float(q1[1])), (float(q2[0]), float(q2[1])),
                      rms, int(len(pts)), rms > p)


def _stroke_half_width(a_ink, o_ink, a_gap, o_gap, p) -> float:
    """Half-width bracketed by the body of the stroke (away from both ends):
    at least the widest inked offset, below the nearest blank one.  The
    estimate leans to the thin side; wide brackets come from axis-aligned
    strokes where the ink fits many widths."""
    lo_a, hi_a = a_ink.min() + 2 * p, a_ink.max() - 2 * p
    body = (a_ink > lo_a) & (a_ink < hi_a)
    h_lo = float(o_ink[body].max() if body.any() else o_ink.max())
    blank = (a_gap > lo_a) & (a_gap < hi_a) & (o_gap >= h_lo)
    h_hi = float(o_gap[blank].min()) if blank.any() else h_lo + p
    return min((h_lo + h_hi) / 2, h_lo + p / 2)


def _end_position(a_ink, o_ink, a_gap, o_gap, h, p) -> float:
    """Midpoint of the far-end positions consistent with the ink."""
    reach = np.sqrt(np.maximum(h * h - o_ink**2, 0.0))
    lower = float(np.max(a_ink - reach))
    near = (o_gap < h) & (a_gap > a_ink.max() - p)
    limits = a_gap[near] - np.sqrt(h * h - o_gap[near] ** 2)
    limits = limits[limits > lower]
    upper = float(limits.min()) if limits.size else lower + p
    return (lower + upper) / 2


def rasterize_segment(pix: np.ndarray, origin, dpi, p1, p2, width_px: float = 1.0) -> np.ndarray:
    """Ink pixels whose centres lie within ``width_px / 2`` pixels of the
    segment ``p1-p2`` (paper mm).  Modifies and returns ``pix``."""
    p = 25.4 / dpi
    h, w = pix.shape
    half = width_px * p / 2
    xs0, xs1 = sorted((p1[0], p2[0]))
    ys0, ys1 = sorted((p1[1], p2[1]))
    c0 = max(0, int((xs0 - half - origin[0]) / p) - 1)
    c1 = min(w, int((xs1 + half - origin[0]) / p) + 2)
    r0 = max(0, int((origin[1] - ys1 - half) / p) - 1)
    r1 = min(h, int((origin[1] - ys0 + half) / p) + 2)
    cc, rr = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    x = origin[0] + (cc + 0.5) * p
    y = origin[1] - (rr + 0.5) * p
    d = np.array(p2, dtype=float) - np.array(p1, dtype=float)
    ll = float(d @ d)
    t = np.clip(((x - p1[0]) * d[0] + (y - p1[1]) * d[1]) / ll, 0, 1) if ll else 0 * x
    dist = np.hypot(x - (p1[0] + t * d[0]), y - (p1[1] + t * d[1]))
    pix[r0:r1, c0:c1] |= dist <= half
    return pix


# ---------------------------------------------------------------------- I/O

def _pbm_tokens(data: bytes):
    """Yield header tokens and finally the offset of the raster data."""
    i = 0
    n = len(data)
    tokens = []
    while len(tokens) < 3:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("truncated PBM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # one whitespace byte ends the header


def read_pbm(path, dpi: int | None = None, origin=None) -> MonoRaster:
    """Read a P4 bitmap plus its optional ``.rplace`` sidecar."""
    path = Path(path)
    data = path.read_bytes()
    tokens, start = _pbm_tokens(data)
    if tokens[0] != b"P4":
        raise FormatError("not a binary PBM (P4) file", path)
    try:
        w, h = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise FormatError("bad PBM dimensions", path) from None
    stride = (w + 7) // 8
    body = data[start:start + stride * h]
    if len(body) != stride * h:
        raise FormatError("truncated PBM raster", path)
    bits = np.frombuffer(body, dtype=np.uint8).reshape(h, stride).copy()
    if w % 8:
        bits[:, -1] &= (0xFF << (8 - w % 8)) & 0xFF  # padding bits are not ink
    sdpi, sorigin = 300, (0.0, 0.0)
    side = sidecar_path(path)
    if side.exists():
        sdpi, sorigin = read_placement(side)
    return MonoRaster(w, h, dpi or sdpi, bits, origin if origin is not None else sorigin)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".rplace")


def read_placement(path):
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] != "RPLACE" or len(parts) != 4:
            raise FormatError("expected 'RPLACE <dpi> <x_mm> <y_mm>'", path, lineno)
        return int(parts[1]), (float(parts[2]), float(parts[3]))
    raise FormatError("empty placement file", path)


def write_pbm(r: MonoRaster, path, sidecar: bool = True) -> None:
    path = Path(path)
    path.write_bytes(b"P4\n%d %d\n" % (r.width, r.height) + r.bits.tobytes())
    if sidecar:
        sidecar_path(path).write_text(
            f"RPLACE {r.dpi} {r.origin[0]!r} {r.origin[1]!r}\n", encoding="utf-8")
