"""Tabular design documents: block tree, records, layout and continuation.

The block tree describes one record row.  A ``V`` split places its parts
side by side (left to right), an ``H`` split stacks them (top to bottom);
leaves are the cells and carry the column keys.  Every division has its own
visibility in the header and in the data area.  Record 0 is the header
record and holds the leaf header texts.

Layout works in sheet millimetres with the origin at the top-left corner of
the table and y growing downward.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .enkat.rules import format_number
from .enkat.units import UNITS
from .errors import ChunkTooSmall, FormatError, InvalidStyle, InvalidTkd, UnknownTarget, VersionError
from .export import Seg, Txt
from .geomcore import FONT_HEIGHTS, LINE_TYPES, TEXT_ADVANCE

TKD_VERSION = 1
NUMBER_DIGITS = 5  # significant digits of numeric cells


class Split(str, Enum):
    VERTICAL = "V"
    HORIZONTAL = "H"
    LEAF = "L"


@dataclass
class BlockNode:
    split: Split
    children: list = field(default_factory=list)
    arbitrary: bool = False  # parts: Arbitrary instead of Fixed(len(children))
    visible_in_header: bool = True
    visible_in_data: bool = True
    header_text: str = ""
    key: str | None = None
    unit: str | None = None
    enk_keyword: str | None = None

    @property
    def is_leaf(self):
        return self.split is Split.LEAF


def leaf(key, header="", unit=None, enk=None) -> BlockNode:
    return BlockNode(Split.LEAF, key=key, header_text=header, unit=unit, enk_keyword=enk)


def vsplit(*children, header=True, data=True, text="", enk=None) -> BlockNode:
    return BlockNode(Split.VERTICAL, list(children), False, header, data, text, enk_keyword=enk)


def hsplit(*children, header=True, data=True, text="", arbitrary=False, enk=None) -> BlockNode:
    return BlockNode(Split.HORIZONTAL, list(children), arbitrary, header, data, text, enk_keyword=enk)


def leaf_cells(tree: BlockNode) -> list[BlockNode]:
    """Leaves depth-first: left to right in V splits, top to bottom in H."""
    if tree.is_leaf:
        return [tree]
    out = []
    for c in tree.children:
        out.extend(leaf_cells(c))
    return out


class RecordKind(str, Enum):
    HEADER = "H"
    DATA = "D"
    SECTION = "S"
    GROUP = "G"  # common-name group row produced by factoring


@dataclass
class TkdRecord:
    kind: RecordKind
    values: list
    title: str | None = None
    span: int = 0  # group rows: number of member rows that follow

    @classmethod
    def data(cls, values):
        return cls(RecordKind.DATA, list(values))

    @classmethod
    def section(cls, title, n):
        return cls(RecordKind.SECTION, [None] * n, title)

    @classmethod
    def group(cls, title, n, span=0):
        return cls(RecordKind.GROUP, [None] * n, title, span)

    @property
    def is_data(self):
        return self.kind is RecordKind.DATA


@dataclass
class TkdStyle:
    default_font: float = 3.5
    default_line: str = "solid"
    col_font: dict = field(default_factory=dict)
    col_line: dict = field(default_factory=dict)
    cell_font: dict = field(default_factory=dict)  # (record index, key) -> height
    cell_line: dict = field(default_factory=dict)

    def font(self, row, key):
        return self.cell_font.get((row, key), self.col_font.get(key, self.default_font))

    def line(self, row, key):
        return self.cell_line.get((row, key), self.col_line.get(key, self.default_line))


@dataclass
class Tkd:
    tree: BlockNode
    records: list = field(default_factory=list)
    style: TkdStyle = field(default_factory=TkdStyle)
    name: str = ""
    widths: dict = field(default_factory=dict)  # preferred column widths, mm

    @classmethod
    def new(cls, tree, name="") -> "Tkd":
        hdr = TkdRecord(RecordKind.HEADER, [lf.header_text for lf in leaf_cells(tree)])
        return cls(tree, [hdr], TkdStyle(), name)

    @property
    def leaves(self):
        return leaf_cells(self.tree)

    @property
    def keys(self):
        return [lf.key for lf in self.leaves]

    def key_index(self, key) -> int:
        try:
            return self.keys.index(key)
        except ValueError:
            raise UnknownTarget(f"no column {key!r}") from None

    def data_rows(self):
        return [r for r in self.records if r.is_data]

    def body(self):
        """Records after the header."""
        return self.records[1:] if self.records and self.records[0].kind is RecordKind.HEADER else list(self.records)

    def with_body(self, body) -> "Tkd":
        head = self.records[:1] if self.records and self.records[0].kind is RecordKind.HEADER else []
        return Tkd(self.tree, head + list(body), self.style, self.name, dict(self.widths))

    def copy(self) -> "Tkd":
        return loads_tkd(dumps_tkd(self))


# --------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def validate(tkd: Tkd) -> list[Violation]:
    """All structural problems of ``tkd``; an empty list means valid."""
    out = []

    def walk(n, under_arbitrary=False):
        if n.is_leaf:
            if not n.key:
                out.append(Violation("LeafWithoutKey", "leaf cell without a column key"))
            if n.children:
                out.append(Violation("BadSplit", f"leaf {n.key!r} has children"))
            return
        if n.key:
            out.append(Violation("BadSplit", f"non-leaf block carries key {n.key!r}"))
        if n.arbitrary and n.split is not Split.HORIZONTAL:
            out.append(Violation("BadSplit", "arbitrary part count only on the record (H) axis"))
        if not n.arbitrary and len(n.children) < 2:
            out.append(Violation("BadSplit", "fixed split needs at least two parts"))
        if n.arbitrary and not n.children:
            out.append(Violation("BadSplit", "arbitrary split needs a template part"))
        for c in n.children:
            walk(c)

    walk(tkd.tree)
    leaves = leaf_cells(tkd.tree)
    seen = set()
    for lf in leaves:
        if lf.key in seen:
            out.append(Violation("DuplicateKey", f"column key {lf.key!r} used twice"))
        seen.add(lf.key)
        if lf.unit is not None and lf.unit not in UNITS:
            out.append(Violation("UnknownUnit", f"column {lf.key!r}: unknown unit {lf.unit!r}"))
    n = len(leaves)
    headers = [i for i, r in enumerate(tkd.records) if r.kind is RecordKind.HEADER]
    if not tkd.records or tkd.records[0].kind is not RecordKind.HEADER:
        out.append(Violation("HeaderNotFirst", "record 0 must be the header"))
    if len(headers) > 1:
        out.append(Violation("MultipleHeaders", f"header records at {headers}"))
    for i, r in enumerate(tkd.records):
        if len(r.values) != n:
            out.append(Violation("ArityViolation", f"record {i} has {len(r.values)} values for {n} cells"))
        if r.kind is RecordKind.GROUP:
            members = tkd.records[i + 1:i + 1 + r.span]
            if r.span < 1 or len(members) != r.span or not all(m.is_data for m in members):
                out.append(Violation("BadGroupSpan", f"group record {i} must be followed by {r.span} data records"))
    st = tkd.style
    for h in [st.default_font, *st.col_font.values(), *st.cell_font.values()]:
        if float(h) not in FONT_HEIGHTS:
            out.append(Violation("InvalidStyle", f"font height {h} not standard"))
    for lt in [st.default_line, *st.col_line.values(), *st.cell_line.values()]:
        if lt not in LINE_TYPES:
            out.append(Violation("InvalidStyle", f"line type {lt!r} not standard"))
    return out


def ensure_valid(tkd: Tkd) -> None:
    v = validate(tkd)
    if v:
        raise InvalidTkd("; ".join(f"{x.code}: {x.message}" for x in v))


# ------------------------------------------------------------------ styling

def restyle(tkd: Tkd, key: str, row: int | None = None, font: float | None = None,
            line_type: str | None = None) -> Tkd:
    """Override font height and/or line type of a column or one cell
    (``row`` = record index).  Precedence: cell > column > table default."""
    if key not in tkd.keys:
        raise UnknownTarget(f"no column {key!r}")
    if row is not None and not (0 <= row < len(tkd.records)):
        raise UnknownTarget(f"no record {row}")
    if font is not None and float(font) not in FONT_HEIGHTS:
        raise InvalidStyle(f"font height {font} not standard")
    if line_type is not None and line_type not in LINE_TYPES:
        raise InvalidStyle(f"line type {line_type!r} not standard")
    st = tkd.style
    if font is not None:
        (st.col_font if row is None else st.cell_font)[key if row is None else (row, key)] = float(font)
    if line_type is not None:
        (st.col_line if row is None else st.cell_line)[key if row is None else (row, key)] = line_type
    return tkd


# ------------------------------------------------------------------- layout

@dataclass
class LayoutSpec:
    column_widths: dict
    row_height: float = 8.0
    header_height: float = 15.0
    chunk_height: float | None = None
    continuation: str = "right"  # or "left"
    repeat: str = "header"  # or "numbers"
    chunk_gap: float = 10.0
    row_lines: bool = True
    padding: float = 1.0

    def __post_init__(self):
        if self.row_height <= 0 or self.header_height <= 0:
            raise ValueError("row and header heights must be positive")
        if any(w <= 0 for w in self.column_widths.values()):
            raise ValueError("column widths must be positive")
        if self.continuation not in ("left", "right"):
            raise ValueError("continuation is 'left' or 'right'")
        if self.repeat not in ("header", "numbers"):
            raise ValueError("repeat is 'header' or 'numbers'")
        if self.chunk_height is not None and self.chunk_height < self.header_height + self.row_height:
            raise ChunkTooSmall("chunk height must hold the header and one row")


def layout_spec_for(tkd: Tkd, **overrides) -> LayoutSpec:
    """LayoutSpec from the table's stored widths; a column without one gets
    room for its header text at the default font."""
    widths = {}
    for lf in tkd.leaves:
        w = tkd.widths.get(lf.key)
        if w is None:
            w = max(10.0, math.ceil(text_width(lf.header_text, tkd.style.default_font)) + 2.0)
        widths[lf.key] = float(w)
    return LayoutSpec(widths, **overrides)


@dataclass(frozen=True)
class Overflow:
    record: int
    key: str
    text: str
    width: float
    available: float


@dataclass
class Layout:
    primitives: list
    warnings: list
    width: float
    height: float


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if v == 0 or not math.isfinite(v):
            return format_number(v)
        return format_number(float(format(v, f".{NUMBER_DIGITS}g")))
    return str(v)


def text_width(text: str, height: float) -> float:
    return float(len(text) * TEXT_ADVANCE * Fraction(height).limit_denominator(1000))


def _node_width(n: BlockNode, widths) -> float:
    if n.is_leaf:
        try:
            return float(widths[n.key])
        except KeyError:
            raise InvalidTkd(f"no width given for column {n.key!r}") from None
    ws = [_node_width(c, widths) for c in n.children]
    return sum(ws) if n.split is Split.VERTICAL else max(ws)


def _lines(n: BlockNode, texts: dict | None, growing=False) -> int:
    """Height of a block in text lines; leaves under an arbitrary H split
    grow with the number of lines of their text."""
    if n.is_leaf:
        if growing and texts is not None:
            return max(1, len(texts.get(n.key, "").split("\n")))
        return 1
    grow = growing or n.arbitrary
    ls = [_lines(c, texts, grow) for c in n.children]
    return sum(ls) if n.split is Split.HORIZONTAL else max(ls)


def place(n: BlockNode, x, y, w, h, widths, texts, area, leaves, divs, growing=False):
    """Assign rectangles: ``leaves`` gets (leaf, rect, line count), ``divs``
    gets division segments drawn in ``area`` ('header' or 'data')."""
    if n.is_leaf:
        leaves.append((n, (x, y, w, h), _lines(n, texts, growing)))
        return
    grow = growing or n.arbitrary
    visible = n.visible_in_header if area == "header" else n.visible_in_data
    if n.split is Split.VERTICAL:
        ws = [_node_width(c, widths) for c in n.children]
        total = sum(ws)
        cx = x
        for i, (c, cw) in enumerate(zip(n.children, ws)):
            cw = w * cw / total
            if i == len(n.children) - 1:
                cw = x + w - cx
            if i and visible:
                divs.append((n, Seg(cx, y, cx, y + h)))
            place(c, cx, y, cw, h, widths, texts, area, leaves, divs, grow)
            cx += cw
    else:
        ls = [_lines(c, texts, grow) for c in n.children]
        total = sum(ls)
        cy = y
        for i, (c, cl) in enumerate(zip(n.children, ls)):
            ch = h * cl / total
            if i == len(n.children) - 1:
                ch = y + h - cy
            if i and visible:
                divs.append((n, Seg(x, cy, x + w, cy)))
            place(c, x, cy, w, ch, widths, texts, area, leaves, divs, grow)
            cy += ch


def _header_cells(n: BlockNode, rect, widths, out):
    """Header cells: leaves, or whole blocks whose division is hidden in the
    header (they show the block's own header text)."""
    x, y, w, h = rect
    if n.is_leaf or not n.visible_in_header:
        out.append((n, rect))
        return
    if n.split is Split.VERTICAL:
        ws = [_node_width(c, widths) for c in n.children]
        total, cx = sum(ws), x
        for i, (c, cw) in enumerate(zip(n.children, ws)):
            cw = x + w - cx if i == len(n.children) - 1 else w * cw / total
            _header_cells(c, (cx, y, cw, h), widths, out)
            cx += cw
    else:
        ls = [_lines(c, None) for c in n.children]
        total, cy = sum(ls), y
        for i, (c, cl) in enumerate(zip(n.children, ls)):
            ch = y + h - cy if i == len(n.children) - 1 else h * cl / total
            _header_cells(c, (x, cy, w, ch), widths, out)
            cy += ch


def _centered_text(lines, cx, y, h, font):
    out = []
    n = len(lines)
    top = y + (h - n * font * 1.5 + font * 0.5) / 2
    for i, s in enumerate(lines):
        out.append(Txt(cx, top + font + i * font * 1.5, font, s, "middle"))
    return out


class _Painter:
    def __init__(self, tkd: Tkd, spec: LayoutSpec):
        self.tkd = tkd
        self.spec = spec
        self.widths = spec.column_widths
        self.width = _node_width(tkd.tree, self.widths)
        self.keys = tkd.keys
        self.segs = []
        self.texts = []
        self.warnings = []

    def row_texts(self, rec):
        return {k: format_cell(v) for k, v in zip(self.keys, rec.values)}

    def row_height(self, rec) -> float:
        if not rec.is_data:
            return self.spec.row_height
        return _lines(self.tkd.tree, self.row_texts(rec)) * self.spec.row_height

    def header(self, y) -> float:
        h = self.spec.header_height
        leaves, divs = [], []
        place(self.tkd.tree, 0.0, y, self.width, h, self.widths, None, "header", leaves, divs)
        self.segs += [s for _, s in divs]
        cells = []
        _header_cells(self.tkd.tree, (0.0, y, self.width, h), self.widths, cells)
        hdr = self.tkd.records[0].values if self.tkd.records else [lf.header_text for lf in self.tkd.leaves]
        for n, (cx, cy, cw, ch) in cells:
            text = hdr[self.keys.index(n.key)] if n.is_leaf else n.header_text
            text = "" if text is None else str(text)
            if text:
                font = self.tkd.style.font(0, n.key) if n.is_leaf else self.tkd.style.default_font
                self.texts += _centered_text(text.split("\n"), cx + cw / 2, cy, ch, font)
        self.rule(y + h, None)
        return y + h

    def numbers_row(self, y) -> float:
        h = self.spec.row_height
        leaves, divs = [], []
        place(self.tkd.tree, 0.0, y, self.width, h, self.widths, None, "data", leaves, divs)
        self.segs += [s for _, s in divs]
        font = self.tkd.style.default_font
        for i, (n, (lx, ly, lw, lh), _) in enumerate(leaves):
            self.texts += _centered_text([str(i + 1)], lx + lw / 2, ly, lh, font)
        self.rule(y + h, None)
        return y + h

    def rule(self, y, rec_index):
        """Full-width horizontal line under a row, split per column so each
        piece can carry that cell's line type."""
        if rec_index is None:
            self.segs.append(Seg(0.0, y, self.width, y, self.tkd.style.default_line))
            return
        leaves, divs = [], []
        place(self.tkd.tree, 0.0, 0.0, self.width, 1.0, self.widths, None, "data", leaves, divs)
        # the leaves touching the row bottom tile the full width
        for lf, (lx, ly, lw, lh), _ in leaves:
            if _k(ly + lh) == _k(1.0):
                self.segs.append(Seg(lx, y, lx + lw, y, self.tkd.style.line(rec_index, lf.key)))

    def record(self, i, y, last) -> float:
        rec = self.tkd.records[i]
        h = self.row_height(rec)
        st = self.tkd.style
        if not rec.is_data:
            font = st.default_font
            self.texts += _centered_text([rec.title or ""], self.width / 2, y, h, font)
        else:
            texts = self.row_texts(rec)
            leaves, divs = [], []
            place(self.tkd.tree, 0.0, y, self.width, h, self.widths, texts, "data", leaves, divs)
            self.segs += [s for _, s in divs]
            pad = self.spec.padding
            for n, (lx, ly, lw, lh), nlines in leaves:
                text = texts[n.key]
                if not text:
                    continue
                font = st.font(i, n.key)
                parts = text.split("\n")
                line_h = lh / max(nlines, 1)
                for j, s in enumerate(parts):
                    tw = text_width(s, font)
                    if tw > lw - 2 * pad or j >= nlines:
                        self.warnings.append(Overflow(i, n.key, s, tw, lw - 2 * pad))
                    base = ly + j * line_h + (line_h + font) / 2
                    self.texts.append(Txt(lx + pad, base, font, s, "start"))
        if self.spec.row_lines and not last:
            self.rule(y + h, i)
        return y + h

    def frame(self, height):
        w = self.width
        lt = self.tkd.style.default_line
        self.segs += [Seg(0.0, 0.0, w, 0.0, lt), Seg(0.0, height, w, height, lt),
                      Seg(0.0, 0.0, 0.0, height, lt), Seg(w, 0.0, w, height, lt)]

    def finish(self, height, dx=0.0):
        self.frame(height)
        prims = merge_segments(self.segs) + self.texts
        if dx:
            prims = [translate(p, dx, 0.0) for p in prims]
        return prims


def translate(p, dx, dy):
    if isinstance(p, Seg):
        return Seg(p.x1 + dx, p.y1 + dy, p.x2 + dx, p.y2 + dy, p.line_type)
    return Txt(p.x + dx, p.y + dy, p.height, p.text, p.anchor)


def _k(v):
    return round(v, 9)


def merge_segments(segs) -> list[Seg]:
    """Merge collinear touching or overlapping axis-parallel segments of the
    same line type; output sorted (horizontals by y, then verticals by x)."""
    horiz, vert, other = {}, {}, []
    for s in segs:
        if _k(s.y1) == _k(s.y2):
            a, b = sorted((s.x1, s.x2))
            horiz.setdefault((_k(s.y1), s.line_type), []).append((a, b, s.y1))
        elif _k(s.x1) == _k(s.x2):
            a, b = sorted((s.y1, s.y2))
            vert.setdefault((_k(s.x1), s.line_type), []).append((a, b, s.x1))
        else:
            other.append(s)

    def runs(items):
        items.sort()
        out = []
        for a, b, c in items:
            if out and _k(a) <= _k(out[-1][1]):
                if b > out[-1][1]:
                    out[-1][1] = b
            else:
                out.append([a, b, c])
        return out

    out = []
    for (y, lt), items in sorted(horiz.items()):
        for a, b, yy in runs(items):
            if _k(b) > _k(a):
                out.append(Seg(a, yy, b, yy, lt))
    for (x, lt), items in sorted(vert.items()):
        for a, b, xx in runs(items):
            if _k(b) > _k(a):
                out.append(Seg(xx, a, xx, b, lt))
    return out + other


def layout(tkd: Tkd, spec: LayoutSpec) -> Layout:
    """Primitives of the whole table (all chunks when ``chunk_height`` is set)."""
    ensure_valid(tkd)
    if spec.chunk_height is not None:
        chunks = continue_chunks(tkd, spec)
        prims, warns = [], []
        for c in chunks:
            prims += c.primitives
            warns += c.warnings
        xs = [c.origin[0] for c in chunks]
        w = max(xs) - min(xs) + chunks[0].width
        return Layout(prims, warns, w, max(c.height for c in chunks))
    p = _Painter(tkd, spec)
    y = p.header(0.0)
    body = list(range(1, len(tkd.records)))
    if not body:
        return Layout(p.finish(y), p.warnings, p.width, y)
    for n, i in enumerate(body):
        y = p.record(i, y, n == len(body) - 1)
    return Layout(p.finish(y), p.warnings, p.width, y)


@dataclass
class Chunk:
    index: int
    origin: tuple
    records: list  # record indices
    prefix: str  # 'header' or 'numbers'
    primitives: list
    warnings: list
    width: float
    height: float


def continue_chunks(tkd: Tkd, spec: LayoutSpec) -> list[Chunk]:
    """Split the table into chunks no taller than ``spec.chunk_height``.

    Rows fill top-down greedily.  The first chunk starts with the full
    header (followed by the column-number row when ``repeat='numbers'``);
    later chunks repeat either the header or only the column-number row and
    are placed to the left or right of the previous one.
    """
    ensure_valid(tkd)
    if spec.chunk_height is None:
        raise ValueError("chunk_height is not set")
    probe = _Painter(tkd, spec)
    width = probe.width
    numbers = spec.repeat == "numbers"
    first_prefix = spec.header_height + (spec.row_height if numbers else 0.0)
    later_prefix = spec.row_height if numbers else spec.header_height
    eps = 1e-9

    groups, cur, used = [], [], first_prefix
    for i in range(1, len(tkd.records)):
        h = probe.row_height(tkd.records[i])
        avail = spec.chunk_height - (first_prefix if not groups else later_prefix)
        if h > avail + eps:
            raise ChunkTooSmall(f"record {i} ({h:g} mm) does not fit a {spec.chunk_height:g} mm chunk")
        if cur and used + h > spec.chunk_height + eps:
            groups.append(cur)
            cur, used = [], later_prefix
        cur.append(i)
        used += h
    groups.append(cur)

    step = (width + spec.chunk_gap) * (1 if spec.continuation == "right" else -1)
    out = []
    for k, recs in enumerate(groups):
        p = _Painter(tkd, spec)
        if k == 0:
            y = p.header(0.0)
            if numbers:
                y = p.numbers_row(y)
            prefix = "header"
        else:
            y = p.numbers_row(0.0) if numbers else p.header(0.0)
            prefix = "numbers" if numbers else "header"
        for n, i in enumerate(recs):
            y = p.record(i, y, n == len(recs) - 1)
        dx = k * step
        out.append(Chunk(k, (dx, 0.0), recs, prefix, p.finish(y, dx), p.warnings, width, y))
    return out


# ------------------------------------------------------------ serialization

def _node_lines(n: BlockNode, depth, out):
    ind = "  " * depth
    flags = ("h" if n.visible_in_header else "-") + ("d" if n.visible_in_data else "-")
    if n.is_leaf:
        attrs = {"key": n.key, "header": n.header_text, "unit": n.unit, "enk": n.enk_keyword}
        out.append(f"{ind}L - {flags} {json.dumps(attrs, ensure_ascii=False)}")
        return
    parts = "arbitrary" if n.arbitrary else "fixed"
    attrs = {"header": n.header_text, "enk": n.enk_keyword}
    out.append(f"{ind}{n.split.value} {parts} {flags} {json.dumps(attrs, ensure_ascii=False)}")
    for c in n.children:
        _node_lines(c, depth + 1, out)


def _j(v):
    return json.dumps(v, ensure_ascii=False)


def dumps_tkd(tkd: Tkd) -> str:
    out = [f"TKD {TKD_VERSION}"]
    if tkd.name:
        out.append(f"NAME {_j(tkd.name)}")
    out.append("TREE")
    _node_lines(tkd.tree, 1, out)
    out.append("RECORDS")
    for r in tkd.records:
        if r.kind is RecordKind.SECTION:
            out.append(f"{r.kind.value} {_j(r.title)}")
        elif r.kind is RecordKind.GROUP:
            out.append(f"{r.kind.value} {_j(r.title)} {r.span}")
        else:
            out.append(f"{r.kind.value} {_j(r.values)}")
    st = tkd.style
    out.append("STYLE")
    out.append(f"default_font {st.default_font!r}")
    out.append(f"default_line {st.default_line}")
    for k, v in st.col_font.items():
        out.append(f"font col {_j(k)} {v!r}")
    for (r, k), v in st.cell_font.items():
        out.append(f"font cell {r} {_j(k)} {v!r}")
    for k, v in st.col_line.items():
        out.append(f"line col {_j(k)} {v}")
    for (r, k), v in st.cell_line.items():
        out.append(f"line cell {r} {_j(k)} {v}")
    if tkd.widths:
        out.append("LAYOUT")
        for k, v in tkd.widths.items():
            out.append(f"width {_j(k)} {v!r}")
    out.append("END")
    return "\n".join(out) + "\n"


def _parse_node_line(line, where):
    s = line.strip()
    parts = s.split(" ", 3)
    if len(parts) != 4:
        raise FormatError("bad tree node line", *where)
    sp, kind, flags, attrs = parts
    try:
        split = Split(sp)
        a = json.loads(attrs)
    except (ValueError, json.JSONDecodeError):
        raise FormatError("bad tree node line", *where) from None
    if len(flags) != 2 or flags[0] not in "h-" or flags[1] not in "d-" or kind not in ("-", "fixed", "arbitrary"):
        raise FormatError("bad node flags", *where)
    n = BlockNode(split, [], kind == "arbitrary", flags[0] == "h", flags[1] == "d",
                  a.get("header") or "", a.get("key"), a.get("unit"), a.get("enk"))
    return n


def loads_tkd(text: str, path=None) -> Tkd:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("TKD "):
        raise FormatError("missing 'TKD <version>' line", path, 1)
    try:
        ver = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise FormatError("bad version line", path, 1) from None
    if ver != TKD_VERSION:
        raise VersionError(f"unsupported TKD version {ver}", path, 1)
    return _parse_tkd_body(lines, 1, path)[0]


def _parse_tkd_body(lines, i, path):
    name = ""
    section = None
    stack: list[tuple[int, BlockNode]] = []
    root = None
    records = []
    style = TkdStyle()
    widths = {}
    while i < len(lines):
        raw = lines[i]
        i += 1
        where = (path, i)
        s = raw.strip()
        if not s:
            continue
        if s == "END":
            break
        if s.startswith("NAME "):
            name = json.loads(s[5:])
            continue
        if s in ("TREE", "RECORDS", "STYLE", "LAYOUT"):
            section = s
            continue
        if section == "TREE":
            depth = (len(raw) - len(raw.lstrip(" "))) // 2
            node = _parse_node_line(raw, where)
            while stack and stack[-1][0] >= depth:
                stack.pop()
            if stack:
                stack[-1][1].children.append(node)
            elif root is None:
                root = node
            else:
                raise FormatError("second root block", *where)
            stack.append((depth, node))
        elif section == "RECORDS":
            tag, _, rest = s.partition(" ")
            try:
                kind = RecordKind(tag)
                if kind is RecordKind.GROUP:
                    val, tail = _split_json_tail(rest)
                    span = int(tail)
                else:
                    val = json.loads(rest)
            except (ValueError, json.JSONDecodeError):
                raise FormatError("bad record line", *where) from None
            if kind is RecordKind.SECTION:
                records.append(TkdRecord(kind, None, val))
            elif kind is RecordKind.GROUP:
                records.append(TkdRecord(kind, None, val, span))
            else:
                if not isinstance(val, list):
                    raise FormatError("record values must be a list", *where)
                records.append(TkdRecord(kind, val))
        elif section == "STYLE":
            w = s.split(" ")
            try:
                if w[0] == "default_font":
                    style.default_font = float(w[1])
                elif w[0] == "default_line":
                    style.default_line = w[1]
                elif w[0] in ("font", "line") and w[1] == "col":
                    key, val = _split_json_tail(s.split(" ", 2)[2])
                    if w[0] == "font":
                        style.col_font[key] = float(val)
                    else:
                        style.col_line[key] = val
                elif w[0] in ("font", "line") and w[1] == "cell":
                    row = int(w[2])
                    key, val = _split_json_tail(s.split(" ", 3)[3])
                    if w[0] == "font":
                        style.cell_font[(row, key)] = float(val)
                    else:
                        style.cell_line[(row, key)] = val
                else:
                    raise ValueError(s)
            except (ValueError, IndexError):
                raise FormatError("bad style line", *where) from None
        elif section == "LAYOUT":
            try:
                word, rest = s.split(" ", 1)
                if word != "width":
                    raise ValueError(s)
                key, val = _split_json_tail(rest)
                widths[key] = float(val)
            except (ValueError, json.JSONDecodeError):
                raise FormatError("bad layout line", *where) from None
        else:
            raise FormatError(f"unexpected line {s!r}", *where)
    if root is None:
        raise FormatError("TKD has no TREE", path)
    n = len(leaf_cells(root))
    for r in records:
        if r.values is None:
            r.values = [None] * n
    return Tkd(root, records, style, name, widths), i


def _split_json_tail(s):
    dec = json.JSONDecoder()
    key, end = dec.raw_decode(s)
    return key, s[end:].strip()


def load_tkd(path) -> Tkd:
    p = Path(path)
    return loads_tkd(p.read_text(encoding="utf-8"), p)


def save_tkd(tkd: Tkd, path) -> None:
    Path(path).write_text(dumps_tkd(tkd), encoding="utf-8")
