"""Drawing files: one sheet per file, line-oriented UTF-8 text.

::

    TCGXD 1
    SHEET {"title": "..."}                      title block fields, JSON
    SCALE 1:100
    ELEM Segment <space> <line> x1 y1 x2 y2
    ELEM Polyline <space> <line> x1 y1 x2 y2 ...
    ELEM Text <space> <line> x y height angle slant "text"
    ELEM Magistral <space> <line> interval offset x1 y1 x2 y2 ... "code"
    ELEM RasterRef paper <line> dpi x y width_px height_px "file.pbm"
    ELEM ModuleRef <space> <line> "id"
    MODULE
    PROTO "<type>" 1
    ...
    END

Coordinates are written in the shortest form that reads back to the same
stored value, so save -> load -> save is byte-stable.
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import FormatError, TcgxError, VersionError
from .export import Seg, Txt
from .geomcore import (
    Drawing,
    DrawingScale,
    Magistral,
    ModuleRef,
    Polyline,
    RasterRef,
    Segment,
    Space,
    Text,
    add_element,
    format_stored,
    magistral_marks,
)
from .parmod import dumps_proto, loads_proto

MAGIC = "TCGXD"
VERSION = 1


def _f(v):
    return format_stored(v)


def _pts(pts):
    return " ".join(f"{_f(x)} {_f(y)}" for x, y in pts)


def _j(v):
    return json.dumps(v, ensure_ascii=False)


def dumps_drawing(d: Drawing) -> str:
    out = [f"{MAGIC} {VERSION}", f"SHEET {_j(d.title_block)}", f"SCALE {d.scale}"]
    for e in d.elements:
        head = f"ELEM {e.kind} {e.space.value} {e.line_type}"
        if isinstance(e, Segment):
            out.append(f"{head} {_pts([e.p1, e.p2])}")
        elif isinstance(e, Polyline):
            out.append(f"{head} {_pts(e.points)}")
        elif isinstance(e, Text):
            out.append(f"{head} {_pts([e.pos])} {_f(e.height)} {e.angle} {int(e.slant)} {_j(e.text)}")
        elif isinstance(e, Magistral):
            out.append(f"{head} {_f(e.mark_interval)} {_f(e.first_mark_offset)} {_pts(e.path)} {_j(e.mark_code)}")
        elif isinstance(e, RasterRef):
            out.append(f"{head} {e.dpi} {_pts([e.origin])} {e.width_px} {e.height_px} {_j(e.name)}")
        elif isinstance(e, ModuleRef):
            out.append(f"{head} {_j(e.module.id)}")
            out.append("MODULE")
            out.extend(dumps_proto(e.module).splitlines())
        else:
            raise TypeError(f"cannot serialize {e!r}")
    return "\n".join(out) + "\n"


def _split(line):
    """Numeric tokens and an optional trailing JSON string."""
    if '"' in line:
        i = line.index('"')
        return line[:i].split(), json.loads(line[i:])
    return line.split(), None


def _pairs(nums):
    if len(nums) % 2:
        raise ValueError("odd number of coordinates")
    return [(float(nums[i]), float(nums[i + 1])) for i in range(0, len(nums), 2)]


def loads_drawing(text: str, path=None) -> Drawing:
    lines = text.splitlines()
    if not lines or lines[0].split()[:1] != [MAGIC]:
        raise FormatError(f"missing '{MAGIC} <version>' line", path, 1)
    try:
        ver = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise FormatError("bad version line", path, 1) from None
    if ver != VERSION:
        raise VersionError(f"unsupported drawing version {ver}", path, 1)
    d = Drawing()
    sheets = 0
    i = 1
    while i < len(lines):
        lineno = i + 1
        s = lines[i].strip()
        i += 1
        if not s:
            continue
        try:
            if s.startswith("SHEET"):
                sheets += 1
                if sheets > 1:
                    raise FormatError("a drawing file holds exactly one sheet", path, lineno)
                rest = s[5:].strip()
                d.title_block = json.loads(rest) if rest else {}
            elif s.startswith("SCALE "):
                d.scale = DrawingScale.parse(s[6:])
            elif s.startswith("ELEM "):
                toks, tail = _split(s)
                kind, space, lt = toks[1], Space(toks[2]), toks[3]
                nums = toks[4:]
                if kind == "Segment":
                    p = _pairs(nums)
                    if len(p) != 2:
                        raise ValueError("segment needs two points")
                    e = Segment(p[0], p[1], space, lt)
                elif kind == "Polyline":
                    e = Polyline(_pairs(nums), space, lt)
                elif kind == "Text":
                    x, y, h, ang, sl = nums
                    e = Text((float(x), float(y)), tail, float(h), int(ang), sl == "1", space, lt)
                elif kind == "Magistral":
                    e = Magistral(_pairs(nums[2:]), tail, float(nums[0]), float(nums[1]), space, lt)
                elif kind == "RasterRef":
                    dpi, x, y, w, h = nums
                    e = RasterRef(tail, int(dpi), (float(x), float(y)), int(w), int(h))
                elif kind == "ModuleRef":
                    if i >= len(lines) or lines[i].strip() != "MODULE":
                        raise FormatError("ModuleRef must be followed by a MODULE block", path, lineno)
                    start = i + 1
                    j = start
                    while j < len(lines) and lines[j].strip() != "END":
                        j += 1
                    if j >= len(lines):
                        raise FormatError("unterminated MODULE block", path, start)
                    m = loads_proto("\n".join(lines[start:j + 1]), path, start + 1)
                    if m.id != tail:
                        raise FormatError(f"module id {m.id!r} does not match {tail!r}", path, lineno)
                    i = j + 1
                    e = ModuleRef(m, space, lt)
                else:
                    raise FormatError(f"unknown element kind {kind!r}", path, lineno)
                add_element(d, e)
            else:
                raise FormatError(f"unexpected line {s!r}", path, lineno)
        except FormatError:
            raise
        except TcgxError as exc:
            raise FormatError(f"{type(exc).__name__}: {exc}", path, lineno) from exc
        except (ValueError, IndexError, json.JSONDecodeError) as exc:
            raise FormatError(f"malformed line: {exc}", path, lineno) from None
    if sheets != 1:
        raise FormatError("missing SHEET line", path)
    return d


def load_drawing(path) -> Drawing:
    p = Path(path)
    return loads_drawing(p.read_text(encoding="utf-8"), p)


def save_drawing(d: Drawing, path) -> None:
    Path(path).write_text(dumps_drawing(d), encoding="utf-8")


# ------------------------------------------------------------------- render

def drawing_primitives(d: Drawing) -> list:
    """Paper-space primitives of the sheet, y flipped for SVG."""
    f = d.scale.factor
    out = []

    def pp(p, space):
        x, y = p
        if space is Space.NATURAL:
            x, y = x / f, y / f
        return x, -y

    def emit(e):
        if isinstance(e, Segment):
            (a, b), (c, dd) = pp(e.p1, e.space), pp(e.p2, e.space)
            out.append(Seg(a, b, c, dd, e.line_type))
        elif isinstance(e, (Polyline, Magistral)):
            pts = [pp(p, e.space) for p in (e.points if isinstance(e, Polyline) else e.path)]
            out.extend(Seg(a[0], a[1], b[0], b[1], e.line_type) for a, b in zip(pts, pts[1:]))
            if isinstance(e, Magistral):
                for mk in magistral_marks(e, d.scale):
                    x, y = pp(mk.point, e.space)
                    out.append(Txt(x, y + 1.25, 2.5, mk.code, "middle"))
        elif isinstance(e, Text):
            x, y = pp(e.pos, e.space)
            out.append(Txt(x, y, e.height, e.text))
        elif isinstance(e, RasterRef):
            r = e.own_rect()
            x0, y0, x1, y1 = r.x0, -r.y1, r.x1, -r.y0
            out.extend([Seg(x0, y0, x1, y0, "thin"), Seg(x1, y0, x1, y1, "thin"),
                        Seg(x1, y1, x0, y1, "thin"), Seg(x0, y1, x0, y0, "thin")])
        elif isinstance(e, ModuleRef):
            for g in e.module.geometry:
                emit(g)

    for e in d.elements:
        emit(e)
    return out
