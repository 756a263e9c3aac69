"""Layout primitives and their SVG / CSV / text serializations.

Primitives live in sheet coordinates: millimetres, origin top-left, y down.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

# stroke widths in mm per line type; dash patterns in mm
_STROKE = {
    "solid": (0.5, None),
    "thin": (0.25, None),
    "wavy": (0.25, None),
    "zigzag": (0.25, None),
    "dashed": (0.25, "3 1.5"),
    "dash-dot-thin": (0.25, "8 1.5 0.5 1.5"),
    "dash-dot-thick": (0.5, "8 1.5 0.5 1.5"),
    "dash-dot-dot": (0.25, "8 1.5 0.5 1.5 0.5 1.5"),
}


@dataclass(frozen=True)
class Seg:
    x1: float
    y1: float
    x2: float
    y2: float
    line_type: str = "solid"


@dataclass(frozen=True)
class Txt:
    """Text with its baseline at ``y``; ``anchor`` is 'start' or 'middle'."""

    x: float
    y: float
    height: float
    text: str
    anchor: str = "start"


def fmt(v: float) -> str:
    s = format(float(v), ".6g")
    if "e" in s:
        s = format(float(v), ".6f").rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def extent(prims) -> tuple[float, float, float, float]:
    xs, ys = [], []
    for p in prims:
        if isinstance(p, Seg):
            xs += [p.x1, p.x2]
            ys += [p.y1, p.y2]
        else:
            xs.append(p.x)
            ys += [p.y - p.height, p.y]
    if not xs:
        return (0.0, 0.0, 0.0, 0.0)
    return (min(xs), min(ys), max(xs), max(ys))


def export_svg(prims, margin: float = 0.0) -> str:
    """SVG document with 1 user unit = 1 mm and black strokes."""
    x0, y0, x1, y1 = extent(prims)
    x0, y0, x1, y1 = x0 - margin, y0 - margin, x1 + margin, y1 + margin
    w, h = x1 - x0, y1 - y0
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(w)}mm" height="{fmt(h)}mm" '
        f'viewBox="{fmt(x0)} {fmt(y0)} {fmt(w)} {fmt(h)}">',
    ]
    for p in prims:
        if isinstance(p, Seg):
            width, dash = _STROKE.get(p.line_type, _STROKE["solid"])
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{fmt(p.x1)}" y1="{fmt(p.y1)}" x2="{fmt(p.x2)}" y2="{fmt(p.y2)}" '
                       f'stroke="black" stroke-width="{fmt(width)}"{extra}/>')
        else:
            out.append(f'<text x="{fmt(p.x)}" y="{fmt(p.y)}" font-size="{fmt(p.height)}" '
                       f'font-family="sans-serif" text-anchor="{p.anchor}">{_esc(p.text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def primitives_text(prims) -> str:
    """Canonical line-per-primitive dump used for determinism checks."""
    lines = []
    for p in prims:
        if isinstance(p, Seg):
            lines.append(f"SEG {p.line_type} {p.x1!r} {p.y1!r} {p.x2!r} {p.y2!r}")
        else:
            lines.append(f"TXT {p.anchor} {p.x!r} {p.y!r} {p.height!r} {p.text}")
    return "\n".join(lines) + ("\n" if lines else "")


def export_csv(tkd) -> str:
    """Records as CSV: header row of leaf keys, then data rows; section and
    group rows put their title in the first column."""
    from .tkdmodel import RecordKind, format_cell, leaf_cells

    leaves = leaf_cells(tkd.tree)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([leaf.key for leaf in leaves])
    for rec in tkd.records:
        if rec.kind is RecordKind.HEADER:
            continue
        if rec.kind in (RecordKind.SECTION, RecordKind.GROUP):
            w.writerow([rec.title] + [""] * (len(leaves) - 1))
        else:
            w.writerow([format_cell(v) for v in rec.values])
    return buf.getvalue()
