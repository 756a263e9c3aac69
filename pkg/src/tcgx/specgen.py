"""Specification generation: harvest specifying records from drawing
modules, fill a TKD with them and post-process its rows.

Row operations work on the body of a TKD (the records after the header).
Section rows split the body into independent segments; a group row and the
data rows it spans form a segment of their own.  Operations return a new
TKD; per-cell style overrides are keyed by record index and do not survive
reordering, so they are dropped, while column styles are kept.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from itertools import groupby
from pathlib import Path

from .enkat.units import UNITS
from .errors import InvalidTkd, QuantityMismatch, TcgxError, UnitMismatch, UnknownUnit
from .geomcore import Drawing, ModuleRef
from .records import ItemBuffer, SpecRecord
from .tkdmodel import RecordKind, Tkd, TkdRecord, TkdStyle, ensure_valid, format_cell

log = logging.getLogger(__name__)

QTY_KEY = "qty"


# ------------------------------------------------------------------ collect

@dataclass
class CollectScope:
    """``target`` is a Drawing or a list of drawing file paths;
    ``module_types`` None means every type."""

    target: object
    module_types: frozenset | None = None

    def __post_init__(self):
        if not isinstance(self.target, Drawing):
            self.target = [Path(p) for p in self.target]
            if not self.target:
                raise ValueError("collect scope names no files")
        if self.module_types is not None:
            self.module_types = frozenset(self.module_types)


@dataclass(frozen=True)
class CollectError:
    path: str
    message: str


def _drawing_records(d: Drawing, fname: str, types) -> list[SpecRecord]:
    out = []

    def walk(elements):
        for e in elements:
            if not isinstance(e, ModuleRef):
                continue
            m = e.module
            if types is None or m.type_name in types:
                for r in m.spec_records:
                    out.append(SpecRecord(dict(r.properties), r.quantity, (fname, m.id, m.type_name)))
            walk(m.geometry)

    walk(d.elements)
    return out


def collect(scope: CollectScope, errors: list | None = None, workers: int = 4) -> list[SpecRecord]:
    """Specifying records of all matching modules, in file order then element
    order.  Unreadable files are appended to ``errors`` and skipped."""
    from .drawfile import load_drawing

    types = scope.module_types
    if isinstance(scope.target, Drawing):
        return _drawing_records(scope.target, "", types)

    def read(p):
        try:
            return _drawing_records(load_drawing(p), str(p), types), None
        except (OSError, TcgxError, UnicodeDecodeError) as exc:
            return [], CollectError(str(p), f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(read, scope.target))
    out = []
    for recs, err in results:
        out.extend(recs)
        if err is not None:
            log.warning("%s: %s", err.path, err.message)
            if errors is not None:
                errors.append(err)
    return out


# --------------------------------------------------------------------- fill

@dataclass(frozen=True)
class Unmatched:
    key: str
    source: tuple

    def __str__(self):
        f, mid, _ = (tuple(self.source) + ("", "", ""))[:3]
        return f"WARN unmatched {self.key} from {f}#{mid}"


def _cell_value(value, unit, leaf):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return value
    v = float(value)
    if unit is None or leaf.unit is None or unit == leaf.unit:
        return v
    try:
        return UNITS.convert(v, unit, leaf.unit)
    except (QuantityMismatch, UnknownUnit) as exc:
        raise UnitMismatch(f"column {leaf.key!r}: {exc}") from None


def _row_of(tkd: Tkd, rec: SpecRecord, unmatched: list | None) -> TkdRecord:
    leaves = tkd.leaves
    pos = {lf.key: i for i, lf in enumerate(leaves)}
    values = [None] * len(leaves)
    for key, (value, unit) in rec.properties.items():
        if key == QTY_KEY and QTY_KEY in pos:
            continue
        i = pos.get(key)
        if i is None:
            if unmatched is not None:
                u = Unmatched(key, rec.source)
                if u not in unmatched:
                    unmatched.append(u)
            continue
        values[i] = _cell_value(value, unit, leaves[i])
    if QTY_KEY in pos:
        values[pos[QTY_KEY]] = rec.quantity
    return TkdRecord.data(values)


def fill(tkd: Tkd, records, unmatched: list | None = None) -> Tkd:
    """Append one data row per record.  Properties are routed by column key
    and numbers converted to the column unit; the record quantity goes to the
    ``qty`` column.  Properties without a column are appended to
    ``unmatched`` once per (key, source)."""
    ensure_valid(tkd)
    rows = [_row_of(tkd, r, unmatched) for r in records]
    out = tkd.copy()
    out.records.extend(rows)
    return out


# ----------------------------------------------------------- row operations

def _detach(tkd: Tkd, body) -> Tkd:
    st = TkdStyle(tkd.style.default_font, tkd.style.default_line,
                  col_font=dict(tkd.style.col_font), col_line=dict(tkd.style.col_line))
    head = tkd.records[:1] if tkd.records and tkd.records[0].kind is RecordKind.HEADER else []
    return Tkd(tkd.tree, head + list(body), st, tkd.name, dict(tkd.widths))


def segments(body) -> list[tuple[TkdRecord | None, list]]:
    """Split a body into (leading row, data rows): the leading row is a
    section or group row, or None for rows before any."""
    out = []
    lead, rows, left = None, [], None
    for r in body:
        if left == 0:
            out.append((lead, rows))
            lead, rows, left = None, [], None
        if r.kind in (RecordKind.SECTION, RecordKind.GROUP):
            if lead is not None or rows:
                out.append((lead, rows))
            lead, rows = r, []
            left = r.span if r.kind is RecordKind.GROUP else None
        elif r.is_data:
            rows.append(r)
            if left is not None:
                left -= 1
    if lead is not None or rows:
        out.append((lead, rows))
    return out


def _join(segs) -> list:
    body = []
    for lead, rows in segs:
        if lead is not None:
            if lead.kind is RecordKind.GROUP:
                lead = TkdRecord(RecordKind.GROUP, list(lead.values), lead.title, len(rows))
            body.append(lead)
        body.extend(rows)
    return body


def _sort_key(v):
    if v is None:
        return (0, 0.0, "")
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (1, float(v), "")
    return (2, 0.0, str(v))


def pack_sections(tkd: Tkd, section_key: str) -> Tkd:
    """Regroup data rows by ``section_key``: stable sort on the rendered
    value, one section row titled with it before each group, value cleared
    from the members.  Re-packing a packed table keeps each row in its
    section, since a cleared row takes its section title as its value."""
    i = tkd.key_index(section_key)
    body = tkd.body()
    if any(r.kind is RecordKind.GROUP for r in body):
        raise InvalidTkd("pack sections before factoring common names")
    tagged = []
    title = None
    for r in body:
        if r.kind is RecordKind.SECTION:
            title = r.title
        elif r.is_data:
            v = r.values[i]
            v = title if v is None and title is not None else v
            tagged.append(("" if v is None else format_cell(v), r))
    tagged.sort(key=lambda t: t[0])
    n = len(tkd.leaves)
    out = []
    for label, members in groupby(tagged, key=lambda t: t[0]):
        out.append(TkdRecord.section(label, n))
        for _, r in members:
            vals = list(r.values)
            vals[i] = None
            out.append(TkdRecord.data(vals))
    return _detach(tkd, out)


def sort_rows(tkd: Tkd, keys) -> Tkd:
    """Stable multi-key sort of the data rows inside every segment.  Empty
    cells sort first, then numbers by value, then texts by code point."""
    idx = [tkd.key_index(k) for k in keys]
    segs = [(lead, sorted(rows, key=lambda r: tuple(_sort_key(r.values[i]) for i in idx)))
            for lead, rows in segments(tkd.body())]
    return _detach(tkd, _join(segs))


def exact_sum(values) -> Decimal:
    """Exact sum of the decimal renderings of ``values``."""
    return sum((Decimal(repr(float(v))) for v in values), Decimal(0))


def _qty(v):
    return v is None or (isinstance(v, (int, float)) and not isinstance(v, bool))


def merge_identical(tkd: Tkd, qty_key: str = QTY_KEY) -> Tkd:
    """Collapse runs of adjacent data rows that agree in every column except
    ``qty_key``; quantities are added exactly in decimal arithmetic and the
    sum is stored as the nearest float."""
    q = tkd.key_index(qty_key)

    def rest(r):
        return [v for j, v in enumerate(r.values) if j != q]

    segs = []
    for lead, rows in segments(tkd.body()):
        merged = []
        for r in rows:
            prev = merged[-1] if merged else None
            if prev is not None and rest(prev[0]) == rest(r) and _qty(r.values[q]) and _qty(prev[0].values[q]):
                prev.append(r)
            else:
                merged.append([r])
        out = []
        for run in merged:
            if len(run) == 1:
                out.append(TkdRecord.data(run[0].values))
                continue
            qs = [r.values[q] for r in run if r.values[q] is not None]
            vals = list(run[0].values)
            vals[q] = float(exact_sum(qs)) if qs else None
            out.append(TkdRecord.data(vals))
        segs.append((lead, out))
    return _detach(tkd, _join(segs))


def word_prefix(names, min_chars: int) -> str | None:
    """Longest common prefix of ``names`` ending at a word boundary, with a
    non-empty remainder in every name; None if shorter than ``min_chars``."""
    if len(names) < 2 or not all(isinstance(s, str) for s in names):
        return None
    lo, hi = min(names), max(names)
    n = 0
    while n < len(lo) and n < len(hi) and lo[n] == hi[n]:
        n += 1
    common = lo[:n]
    cut = common.rfind(" ")
    while cut >= 0:
        prefix = common[:cut].rstrip()
        if len(prefix) < min_chars or not prefix.strip():
            return None
        if all(s[cut:].strip() for s in names):
            return prefix
        cut = common.rfind(" ", 0, cut)
    return None


def _remainder(name: str, prefix: str) -> str:
    return name[len(prefix):].lstrip(" ")


def factor_common_names(tkd: Tkd, name_key: str, min_prefix_chars: int = 4) -> Tkd:
    """Give maximal runs of two or more consecutive data rows whose names
    share a word-boundary prefix of at least ``min_prefix_chars`` characters a
    group row carrying the prefix; members keep the remainder.  Rows already
    inside a group are left alone."""
    i = tkd.key_index(name_key)
    n = len(tkd.leaves)
    segs = []
    for lead, rows in segments(tkd.body()):
        if lead is not None and lead.kind is RecordKind.GROUP:
            segs.append((lead, rows))
            continue
        cur = (lead, [])
        start = 0
        while start < len(rows):
            end, prefix = start + 1, None
            while end < len(rows):
                p = word_prefix([r.values[i] for r in rows[start:end + 1]], min_prefix_chars)
                if p is None:
                    break
                prefix, end = p, end + 1
            if prefix is None:
                cur[1].append(rows[start])
                start += 1
                continue
            if cur[0] is not None or cur[1]:
                segs.append(cur)
            members = []
            for r in rows[start:end]:
                vals = list(r.values)
                vals[i] = _remainder(vals[i], prefix)
                members.append(TkdRecord.data(vals))
            segs.append((TkdRecord.group(prefix, n, len(members)), members))
            cur = (None, [])
            start = end
        if cur[0] is not None or cur[1]:
            segs.append(cur)
    return _detach(tkd, _join(segs))


# -------------------------------------------------------------- item buffer

def buffer_extract(tkd: Tkd, start: int, stop: int) -> ItemBuffer:
    """Data rows among body records ``start:stop`` as detached records: each
    non-empty cell becomes a property keyed by its column, numbers carrying
    the column unit; the ``qty`` column becomes the quantity."""
    leaves = tkd.leaves
    body = tkd.body()
    if not (0 <= start <= stop <= len(body)):
        raise IndexError(f"row range {start}:{stop} outside 0:{len(body)}")
    out = []
    for r in body[start:stop]:
        if not r.is_data:
            continue
        props = {}
        qty = 1.0
        for lf, v in zip(leaves, r.values):
            if v is None:
                continue
            if lf.key == QTY_KEY and _qty(v):
                qty = float(v)
                continue
            numeric = isinstance(v, (int, float)) and not isinstance(v, bool)
            props[lf.key] = (v, lf.unit if numeric else None)
        out.append(SpecRecord(props, qty))
    return ItemBuffer(out)


def buffer_insert(tkd: Tkd, buf: ItemBuffer, unmatched: list | None = None) -> Tkd:
    """Append the buffered rows, routed by column key with unit conversion."""
    return fill(tkd, buf.rows, unmatched)


def unmatched_keys(unmatched) -> list[str]:
    seen = []
    for u in unmatched:
        if u.key not in seen:
            seen.append(u.key)
    return seen

