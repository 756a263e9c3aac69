"""2D drawing model: storage precision, coordinate spaces, elements, styles.

Coordinates are millimetres.  They are *stored* as 32-bit floats and
*computed* in 64-bit floats; values are quantized once, when an element is
constructed.  Two spaces share the sheet-centre origin: natural (real-world
size) and paper (natural divided by the drawing scale).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import ClassVar, Iterable, Sequence

import numpy as np

from .errors import (
    EmptyExtent,
    InvalidCoordinate,
    InvalidGeometry,
    InvalidScale,
    InvalidStyle,
    TooSmall,
)

log = logging.getLogger(__name__)

Point = tuple[float, float]

MIN_PAPER_SIZE = Fraction(3, 10)  # mm; smaller elements are refused
MAX_NATURAL_EXTENT = 30000.0  # mm; advisory only
_F32_MAX = float(np.finfo(np.float32).max)


# ---------------------------------------------------------------- precision

def quantize(x: float) -> float:
    """Round a working coordinate to the nearest stored (32-bit) value."""
    x = float(x)
    if not math.isfinite(x):
        raise InvalidCoordinate(f"non-finite coordinate {x!r}")
    if abs(x) > _F32_MAX:
        raise InvalidCoordinate(f"coordinate {x!r} overflows storage")
    q = np.float32(x)
    if not np.isfinite(q):
        raise InvalidCoordinate(f"coordinate {x!r} overflows storage")
    return float(q)


def quantize_point(p: Sequence[float]) -> Point:
    return (quantize(p[0]), quantize(p[1]))


def stored_ulp(x: float) -> float:
    return float(np.spacing(np.float32(abs(x))))


def work_ulp(x: float) -> float:
    return float(np.spacing(np.float64(abs(x))))


def format_stored(x: float) -> str:
    """Shortest decimal text that reads back to the same stored value."""
    s = np.format_float_positional(np.float32(x), unique=True, trim="-")
    return "0" if s == "-0" else s


# -------------------------------------------------------------- style tables

class Space(str, Enum):
    NATURAL = "natural"
    PAPER = "paper"


# line types of the drafting standard (names are the file tokens)
LINE_TYPES = (
    "solid",
    "thin",
    "wavy",
    "dashed",
    "dash-dot-thin",
    "dash-dot-thick",
    "dash-dot-dot",
    "zigzag",
)
# drafting font heights, mm on paper
FONT_HEIGHTS = (1.8, 2.5, 3.5, 5.0, 7.0, 10.0, 14.0, 20.0, 28.0, 40.0)
# text directions; the slant flag selects the 75 degree italic form
TEXT_ANGLES = (0, 90, 270)
SLANT_ANGLE = 75
# arrow and serif sizes are placeholders pending the real blank set
ARROW_SIZES = (2.5, 3.5, 5.0)
SERIF_SIZES = (2.0, 3.0)
# character advance as a fraction of the font height (type B letters + gap)
TEXT_ADVANCE = Fraction(4, 5)

_REDUCTIONS = ("1", "2", "2.5", "4", "5", "10", "15", "20", "25", "40", "50",
               "75", "100", "200", "400", "500", "800", "1000")
_ENLARGEMENTS = ("2", "2.5", "4", "5", "10", "20", "40", "50", "100")
STANDARD_SCALES = tuple(Fraction(r) for r in _REDUCTIONS) + tuple(
    1 / Fraction(e) for e in _ENLARGEMENTS)


def _check_line_type(lt):
    if lt not in LINE_TYPES:
        raise InvalidStyle(f"line type {lt!r} is not a standard line type")


def _check_font_height(h):
    if float(h) not in FONT_HEIGHTS:
        raise InvalidStyle(f"font height {h!r} is not a standard height")


@dataclass(frozen=True)
class DrawingScale:
    """Natural-to-paper ratio; 100 means 1:100, 0.5 means 2:1."""

    ratio: Fraction

    def __post_init__(self):
        r = Fraction(self.ratio)
        if r <= 0:
            raise InvalidScale(f"scale ratio must be positive, got {r}")
        if r not in STANDARD_SCALES:
            raise InvalidScale(f"{_scale_text(r)} is not a standard scale")
        object.__setattr__(self, "ratio", r)

    @classmethod
    def parse(cls, text: str) -> "DrawingScale":
        try:
            a, b = text.strip().split(":")
            return cls(Fraction(b.strip()) / Fraction(a.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, InvalidScale):
                raise
            raise InvalidScale(f"cannot parse scale {text!r}") from None

    def __str__(self):
        return _scale_text(self.ratio)

    @property
    def factor(self) -> float:
        return float(self.ratio)


def _dec(fr: Fraction) -> str:
    if fr.denominator == 1:
        return str(fr.numerator)
    return format(float(fr), "g")


def _scale_text(r: Fraction) -> str:
    return f"1:{_dec(r)}" if r >= 1 else f"{_dec(1 / r)}:1"


def to_paper(p: Sequence[float], s: DrawingScale) -> Point:
    f = s.factor
    return (p[0] / f, p[1] / f)


def to_natural(p: Sequence[float], s: DrawingScale) -> Point:
    f = s.factor
    return (p[0] * f, p[1] * f)


# -------------------------------------------------------------------- rects

@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    def union(self, other: "Rect") -> "Rect":
        return Rect(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))

    def scaled(self, f: float) -> "Rect":
        return Rect(self.x0 * f, self.y0 * f, self.x1 * f, self.y1 * f)

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)

    @classmethod
    def of_points(cls, pts: Iterable[Point]) -> "Rect":
        pts = list(pts)
        if not pts:
            raise EmptyExtent("no geometry")
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return cls(min(xs), min(ys), max(xs), max(ys))


# ----------------------------------------------------------------- elements

@dataclass
class Element:
    """Base of all drawing elements; ``space`` says which system the
    coordinates are in and ``line_type`` indexes :data:`LINE_TYPES`."""

    kind: ClassVar[str] = "Element"

    def own_rect(self) -> Rect:
        """Axis-aligned box in the element's own space."""
        raise NotImplementedError

    def translated(self, dx, dy) -> "Element":
        raise NotImplementedError


@dataclass
class Segment(Element):
    p1: Point
    p2: Point
    space: Space = Space.NATURAL
    line_type: str = "solid"
    kind: ClassVar[str] = "Segment"

    def __post_init__(self):
        self.p1 = quantize_point(self.p1)
        self.p2 = quantize_point(self.p2)
        self.space = Space(self.space)

    def own_rect(self):
        return Rect.of_points([self.p1, self.p2])

    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    def translated(self, dx, dy):
        return Segment((self.p1[0] + dx, self.p1[1] + dy),
                       (self.p2[0] + dx, self.p2[1] + dy), self.space, self.line_type)


@dataclass
class Polyline(Element):
    points: list
    space: Space = Space.NATURAL
    line_type: str = "solid"
    kind: ClassVar[str] = "Polyline"

    def __post_init__(self):
        self.points = [quantize_point(p) for p in self.points]
        self.space = Space(self.space)

    def own_rect(self):
        return Rect.of_points(self.points)

    def length(self) -> float:
        return path_length(self.points)

    def translated(self, dx, dy):
        return Polyline([(x + dx, y + dy) for x, y in self.points], self.space, self.line_type)


@dataclass
class Text(Element):
    """Single-line text; ``height`` is the font height in paper mm whatever
    the space of the anchor point."""

    pos: Point
    text: str
    height: float = 3.5
    angle: int = 0
    slant: bool = False
    space: Space = Space.PAPER
    line_type: str = "solid"
    kind: ClassVar[str] = "Text"

    def __post_init__(self):
        self.pos = quantize_point(self.pos)
        self.height = float(self.height)  # a style-table entry, kept exact
        self.space = Space(self.space)

    def paper_box(self) -> tuple[Fraction, Fraction]:
        """(width, height) of the rendered box on paper, exact."""
        w = len(self.text) * TEXT_ADVANCE * Fraction(self.height)
        h = Fraction(self.height)
        return (h, w) if self.angle in (90, 270) else (w, h)

    def own_rect(self, ratio: float = 1.0):
        w, h = (float(v) for v in self.paper_box())
        if self.space is Space.NATURAL:
            w, h = w * ratio, h * ratio
        x, y = self.pos
        if self.angle == 0:
            return Rect(x, y, x + w, y + h)
        if self.angle == 90:
            return Rect(x - w, y, x, y + h)
        return Rect(x, y - h, x + w, y)

    def translated(self, dx, dy):
        return Text((self.pos[0] + dx, self.pos[1] + dy), self.text, self.height,
                    self.angle, self.slant, self.space, self.line_type)


@dataclass
class Magistral(Element):
    """Trunk-route polyline carrying a periodic condition mark.

    ``mark_interval`` and ``first_mark_offset`` are paper millimetres.
    """

    path: list
    mark_code: str
    mark_interval: float
    first_mark_offset: float = 0.0
    space: Space = Space.NATURAL
    line_type: str = "solid"
    kind: ClassVar[str] = "Magistral"

    def __post_init__(self):
        self.path = [quantize_point(p) for p in self.path]
        self.mark_interval = quantize(self.mark_interval)
        self.first_mark_offset = quantize(self.first_mark_offset)
        self.space = Space(self.space)

    def own_rect(self):
        return Rect.of_points(self.path)

    def translated(self, dx, dy):
        return Magistral([(x + dx, y + dy) for x, y in self.path], self.mark_code,
                         self.mark_interval, self.first_mark_offset, self.space, self.line_type)


@dataclass
class RasterRef(Element):
    """Placement of a monochrome raster underlay; always in paper space.

    ``origin`` is the paper position of the top-left corner of pixel (0, 0);
    rows run downward (towards smaller y).
    """

    name: str
    dpi: int
    origin: Point
    width_px: int
    height_px: int
    space: Space = Space.PAPER
    line_type: str = "solid"
    kind: ClassVar[str] = "RasterRef"

    def __post_init__(self):
        self.origin = quantize_point(self.origin)
        self.space = Space.PAPER

    @property
    def pitch(self) -> float:
        return 25.4 / self.dpi

    def own_rect(self):
        x, y = self.origin
        p = self.pitch
        return Rect(x, y - self.height_px * p, x + self.width_px * p, y)

    def translated(self, dx, dy):
        return RasterRef(self.name, self.dpi, (self.origin[0] + dx, self.origin[1] + dy),
                         self.width_px, self.height_px)


@dataclass
class ModuleRef(Element):
    """Drawing element wrapping a parametric module; geometry is the
    module's cached generator output."""

    module: object
    space: Space = Space.NATURAL
    line_type: str = "solid"
    kind: ClassVar[str] = "ModuleRef"

    def own_rect(self, ratio: float = 1.0):
        geom = getattr(self.module, "geometry", None) or []
        if not geom:
            raise EmptyExtent("module has no cached geometry")
        rects = [element_rect(g, self.space, ratio) for g in geom]
        out = rects[0]
        for r in rects[1:]:
            out = out.union(r)
        return out

    def translated(self, dx, dy):
        self.module.translate(dx, dy)
        return self


ELEMENT_KINDS = {cls.kind: cls for cls in (Segment, Polyline, Text, Magistral, RasterRef, ModuleRef)}


def element_rect(e: Element, space: Space | str, ratio: float = 1.0) -> Rect:
    """Bounding box of ``e`` in ``space``; ``ratio`` is the natural-to-paper
    factor of the drawing."""
    space = Space(space)
    if isinstance(e, (Text, ModuleRef)):
        r = e.own_rect(ratio)
    else:
        r = e.own_rect()
    if e.space is space:
        return r
    return r.scaled(1 / ratio if space is Space.PAPER else ratio)


def paper_footprint(e: Element, scale: DrawingScale) -> Fraction:
    """Largest dimension of the element's paper-space box, exactly."""
    if isinstance(e, Text):
        return max(e.paper_box())
    r = e.own_rect()
    big = max(Fraction(r.x1) - Fraction(r.x0), Fraction(r.y1) - Fraction(r.y0))
    if e.space is Space.NATURAL:
        big /= scale.ratio
    return big


# ---------------------------------------------------------------- magistral

def path_length(pts: Sequence[Point]) -> float:
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))


@dataclass(frozen=True)
class Mark:
    arc_length: float
    point: Point
    angle: float  # degrees, direction of the path at the mark
    code: str


def magistral_marks(m: Magistral, scale: DrawingScale | None = None) -> list[Mark]:
    """Marks at first_mark_offset + k*mark_interval along the path.

    Offsets are paper millimetres; for a natural-space magistral they are
    multiplied by the drawing scale.  Only positions strictly inside the path
    (0 < s < length) get a mark.
    """
    if len(m.path) < 2:
        raise InvalidGeometry("magistral path needs at least two points")
    if m.mark_interval <= 0:
        raise InvalidGeometry("mark interval must be positive")
    total = path_length(m.path)
    if total <= 0:
        raise InvalidGeometry("magistral path has zero length")
    f = scale.factor if (scale is not None and m.space is Space.NATURAL) else 1.0
    step = m.mark_interval * f
    start = m.first_mark_offset * f

    marks = []
    leg = 0
    leg_start = 0.0
    k = 0
    while True:
        s = start + k * step
        k += 1
        if s >= total:
            break
        if s <= 0:
            continue
        # advance to the leg holding arc length s
        while True:
            a, b = m.path[leg], m.path[leg + 1]
            ll = math.hypot(b[0] - a[0], b[1] - a[1])
            if s <= leg_start + ll or leg == len(m.path) - 2:
                break
            leg_start += ll
            leg += 1
        t = (s - leg_start) / ll if ll > 0 else 0.0
        pt = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        ang = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0]))
        marks.append(Mark(s, pt, ang, m.mark_code))
    return marks


# ------------------------------------------------------------------ drawing

@dataclass
class Drawing:
    """One sheet: ordered elements, a scale and a title block."""

    scale: DrawingScale = field(default_factory=lambda: DrawingScale(Fraction(1)))
    title_block: dict = field(default_factory=dict)
    elements: list = field(default_factory=list)

    def add(self, e: Element) -> "Drawing":
        return add_element(self, e)

    def modules(self):
        return [e for e in self.elements if isinstance(e, ModuleRef)]


def check_element(e: Element, scale: DrawingScale) -> None:
    """Raise if ``e`` breaks the style tables or the minimum-size rule."""
    _check_line_type(e.line_type)
    if isinstance(e, Text):
        _check_font_height(e.height)
        if e.angle not in TEXT_ANGLES:
            raise InvalidStyle(f"text angle {e.angle} is not a standard direction")
        if not e.text:
            raise TooSmall("empty text has no footprint")
    if isinstance(e, Polyline) and len(e.points) < 2:
        raise InvalidGeometry("polyline needs at least two points")
    if isinstance(e, Magistral):
        if len(e.path) < 2:
            raise InvalidGeometry("magistral path needs at least two points")
        if e.mark_interval <= 0:
            raise InvalidGeometry("mark interval must be positive")
    if isinstance(e, RasterRef):
        if not 75 <= e.dpi <= 300:
            raise InvalidStyle(f"raster dpi {e.dpi} outside 75..300")
        return
    if isinstance(e, ModuleRef):
        for g in getattr(e.module, "geometry", None) or []:
            check_element(g, scale)
        return
    fp = paper_footprint(e, scale)
    if fp < MIN_PAPER_SIZE:
        raise TooSmall(f"{e.kind} is {float(fp):.4g} mm on paper, below 0.3 mm")


def add_element(d: Drawing, e: Element) -> Drawing:
    check_element(e, d.scale)
    d.elements.append(e)
    for w in extent_warnings(d, [e]):
        log.warning(w)
    return d


def extent_warnings(d: Drawing, elements=None) -> list[str]:
    """Advisory: elements reaching outside the drawing field, and a sheet
    whose overall natural extent is wider or taller than the field."""
    out = []
    total = None
    for e in d.elements if elements is None else elements:
        try:
            r = element_rect(e, Space.NATURAL, d.scale.factor)
        except EmptyExtent:
            continue
        total = r if total is None else total.union(r)
        # the origin is the sheet centre, so the field spans half the extent each way
        if max(abs(r.x0), abs(r.x1), abs(r.y0), abs(r.y1)) * 2 > MAX_NATURAL_EXTENT:
            out.append(f"{e.kind} reaches past {MAX_NATURAL_EXTENT / 2:g} mm from the sheet centre")
    if total is not None and max(total.x1 - total.x0, total.y1 - total.y0) > MAX_NATURAL_EXTENT:
        out.append(f"drawing extent exceeds {MAX_NATURAL_EXTENT:g} mm")
    return out


def bbox(obj, space: Space | str = Space.NATURAL, scale: DrawingScale | None = None) -> Rect:
    """Minimal box of an element or a whole drawing in ``space``."""
    if isinstance(obj, Drawing):
        if not obj.elements:
            raise EmptyExtent("drawing has no elements")
        ratio = obj.scale.factor
        out = None
        for e in obj.elements:
            r = element_rect(e, space, ratio)
            out = r if out is None else out.union(r)
        return out
    ratio = scale.factor if scale is not None else 1.0
    return element_rect(obj, space, ratio)
