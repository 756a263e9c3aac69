"""Parametric modules: typed object lists with referential integrity.

A module type declares named lists of objects and a set of general
parameters.  Objects are dicts keyed by field name; a ``Ref`` field holds the
index of an object in another (or the same) list, or None.  All mutation
goes through the functions here, which keep every reference valid and
regenerate the cached geometry after each change.
"""
from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .enkat.units import UNITS
from .errors import (
    FormatError,
    GeneratorError,
    IntegrityError,
    NotFound,
    StillReferenced,
    TcgxError,
    VersionError,
)
from .geomcore import (
    LINE_TYPES,
    DrawingScale,
    Magistral,
    ModuleRef,
    Polyline,
    Rect,
    Space,
    Text,
    check_element,
    element_rect,
    path_length,
)
from .records import SpecRecord

PROTO_VERSION = 1


class FieldKind(str, Enum):
    NUMBER = "number"
    TEXT = "text"
    FLAG = "flag"
    COLOR = "color"
    LINETYPE = "linetype"
    POINT = "point"
    REF = "ref"


@dataclass(frozen=True)
class FieldDef:
    name: str
    kind: FieldKind
    unit: str | None = None
    target: str | None = None  # list name, for Ref fields
    setting: bool = False  # general parameter acting as a default ("установка")
    default: object = None


@dataclass(frozen=True)
class ListSchema:
    name: str
    fields: tuple


@dataclass
class GenOutput:
    elements: list = field(default_factory=list)
    spec_records: list = field(default_factory=list)
    snap_points: list = field(default_factory=list)


@dataclass(frozen=True)
class ModuleTypeDescriptor:
    type_name: str
    lists: tuple
    params: tuple
    generator: Callable
    version: int = 1

    def list_schema(self, name) -> ListSchema:
        for ls in self.lists:
            if ls.name == name:
                return ls
        raise IntegrityError(f"{self.type_name}: no list {name!r}")

    def field(self, list_name, fname) -> FieldDef:
        for f in self.list_schema(list_name).fields:
            if f.name == fname:
                return f
        raise IntegrityError(f"{self.type_name}.{list_name}: no field {fname!r}")

    def param(self, name) -> FieldDef:
        for f in self.params:
            if f.name == name:
                return f
        raise IntegrityError(f"{self.type_name}: no parameter {name!r}")


REGISTRY: dict[str, ModuleTypeDescriptor] = {}


def register(desc: ModuleTypeDescriptor) -> ModuleTypeDescriptor:
    if desc.type_name in REGISTRY:
        raise ValueError(f"module type {desc.type_name!r} already registered")
    names = [ls.name for ls in desc.lists]
    if len(set(names)) != len(names):
        raise ValueError(f"{desc.type_name}: duplicate list names")
    for ls in desc.lists:
        for f in ls.fields:
            if f.kind is FieldKind.REF and f.target not in names:
                raise ValueError(f"{desc.type_name}.{ls.name}.{f.name}: Ref to unknown list {f.target!r}")
    for f in desc.params:
        if f.kind is FieldKind.REF:
            raise ValueError(f"{desc.type_name}: general parameters cannot be references")
    REGISTRY[desc.type_name] = desc
    return desc


def descriptor(type_name) -> ModuleTypeDescriptor:
    try:
        return REGISTRY[type_name]
    except KeyError:
        raise IntegrityError(f"unknown module type {type_name!r}") from None


# ----------------------------------------------------------------- instance

@dataclass
class ModuleInstance:
    type_name: str
    id: str = "M1"
    lists: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    geometry: list = field(default_factory=list)
    spec_records: list = field(default_factory=list)
    snap_points: list = field(default_factory=list)

    @property
    def descriptor(self) -> ModuleTypeDescriptor:
        return descriptor(self.type_name)

    def translate(self, dx, dy):
        return translate(self, dx, dy)


def _check_value(f: FieldDef, v, where):
    k = f.kind
    ok = True
    if k is FieldKind.NUMBER:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    elif k is FieldKind.TEXT:
        ok = isinstance(v, str)
    elif k is FieldKind.FLAG:
        ok = isinstance(v, bool)
    elif k is FieldKind.COLOR:
        ok = isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= 256
    elif k is FieldKind.LINETYPE:
        ok = v in LINE_TYPES
    elif k is FieldKind.POINT:
        ok = (isinstance(v, (tuple, list)) and len(v) == 2
              and all(isinstance(c, (int, float)) and not isinstance(c, bool) and math.isfinite(c) for c in v))
    elif k is FieldKind.REF:
        ok = v is None or (isinstance(v, int) and not isinstance(v, bool))
    if not ok:
        raise IntegrityError(f"{where}: bad {k.value} value {v!r}")
    if k is FieldKind.NUMBER:
        return float(v)
    if k is FieldKind.POINT:
        return (float(v[0]), float(v[1]))
    return v


def new_instance(type_name: str, id: str = "M1", **params) -> ModuleInstance:
    desc = descriptor(type_name)
    m = ModuleInstance(type_name, id, {ls.name: [] for ls in desc.lists}, {})
    for f in desc.params:
        m.params[f.name] = _check_value(f, params.pop(f.name, f.default), f"{type_name}.{f.name}")
    if params:
        raise IntegrityError(f"{type_name}: unknown parameters {sorted(params)}")
    regenerate(m)
    return m


@dataclass(frozen=True)
class DanglingRef:
    list_name: str
    index: int
    field: str
    target: str
    target_index: int


def validate_integrity(m: ModuleInstance) -> list[DanglingRef]:
    out = []
    desc = m.descriptor
    for ls in desc.lists:
        refs = [f for f in ls.fields if f.kind is FieldKind.REF]
        for i, obj in enumerate(m.lists.get(ls.name, [])):
            for f in refs:
                v = obj.get(f.name)
                if v is not None and not (0 <= v < len(m.lists.get(f.target, []))):
                    out.append(DanglingRef(ls.name, i, f.name, f.target, v))
    return out


def _snapshot(m):
    return copy.deepcopy((m.lists, m.params, m.geometry, m.spec_records, m.snap_points))


def _restore(m, snap):
    m.lists, m.params, m.geometry, m.spec_records, m.snap_points = snap


def _mutate(m, fn):
    """Apply ``fn`` and regenerate; on failure restore the previous state."""
    snap = _snapshot(m)
    try:
        result = fn()
        if validate_integrity(m):
            raise IntegrityError("mutation would leave dangling references")
        regenerate(m)
        return result
    except Exception:
        _restore(m, snap)
        raise


def _checked_object(m, list_name, values, partial=False):
    ls = m.descriptor.list_schema(list_name)
    names = {f.name for f in ls.fields}
    extra = set(values) - names
    if extra:
        raise IntegrityError(f"{list_name}: unknown fields {sorted(extra)}")
    obj = {}
    for f in ls.fields:
        if f.name not in values:
            if partial:
                continue
            v = f.default
        else:
            v = values[f.name]
        v = _check_value(f, v, f"{list_name}.{f.name}")
        if f.kind is FieldKind.REF and v is not None and not (0 <= v < len(m.lists[f.target])):
            raise IntegrityError(f"{list_name}.{f.name}: no object {v} in list {f.target!r}")
        obj[f.name] = v
    return obj


def add_object(m: ModuleInstance, list_name: str, **values) -> int:
    """Append an object; references must point at existing objects."""
    def go():
        obj = _checked_object(m, list_name, values)
        m.lists[list_name].append(obj)
        return len(m.lists[list_name]) - 1
    return _mutate(m, go)


def set_field(m: ModuleInstance, list_name: str, index: int, fname: str, value) -> None:
    def go():
        objs = m.lists[list_name]
        if not 0 <= index < len(objs):
            raise IntegrityError(f"no object {index} in list {list_name!r}")
        objs[index].update(_checked_object(m, list_name, {fname: value}, partial=True))
    _mutate(m, go)


def set_param(m: ModuleInstance, name: str, value) -> None:
    def go():
        f = m.descriptor.param(name)
        m.params[name] = _check_value(f, value, f"{m.type_name}.{name}")
    _mutate(m, go)


def referencers(m: ModuleInstance, list_name: str, index: int) -> list[tuple[str, int]]:
    """Objects holding a Ref to ``(list_name, index)``."""
    out = []
    for ls in m.descriptor.lists:
        refs = [f.name for f in ls.fields if f.kind is FieldKind.REF and f.target == list_name]
        if not refs:
            continue
        for i, obj in enumerate(m.lists[ls.name]):
            if any(obj.get(r) == index for r in refs):
                out.append((ls.name, i))
    return out


def remove_object(m: ModuleInstance, list_name: str, index: int, policy: str = "reject") -> set:
    """Delete an object.  ``reject`` refuses when others refer to it;
    ``cascade`` also deletes every transitive referencer.  Remaining objects
    are compacted and their references re-pointed.  Returns the removed
    (list, index) pairs in pre-removal numbering."""
    if policy not in ("reject", "cascade"):
        raise ValueError("policy is 'reject' or 'cascade'")

    def go():
        if not 0 <= index < len(m.lists.get(list_name, [])):
            raise IntegrityError(f"no object {index} in list {list_name!r}")
        doomed = {(list_name, index)}
        if policy == "reject":
            others = [r for r in referencers(m, list_name, index) if r != (list_name, index)]
            if others:
                raise StillReferenced(f"{list_name}[{index}] is referenced by {others}")
        else:
            todo = [(list_name, index)]
            while todo:
                cur = todo.pop()
                for r in referencers(m, *cur):
                    if r not in doomed:
                        doomed.add(r)
                        todo.append(r)
        _compact(m, doomed)
        return doomed
    return _mutate(m, go)


def _compact(m, doomed):
    desc = m.descriptor
    remap = {}
    for ls in desc.lists:
        new_idx, n = {}, 0
        for i in range(len(m.lists[ls.name])):
            if (ls.name, i) not in doomed:
                new_idx[i] = n
                n += 1
        remap[ls.name] = new_idx
    for ls in desc.lists:
        refs = [f for f in ls.fields if f.kind is FieldKind.REF]
        kept = []
        for i, obj in enumerate(m.lists[ls.name]):
            if (ls.name, i) in doomed:
                continue
            for f in refs:
                v = obj.get(f.name)
                if v is not None:
                    if v not in remap[f.target]:
                        raise IntegrityError(f"{ls.name}[{i}].{f.name} would dangle")
                    obj[f.name] = remap[f.target][v]
            kept.append(obj)
        m.lists[ls.name] = kept


def translate(m: ModuleInstance, dx: float, dy: float) -> ModuleInstance:
    """Shift every Point field (objects and parameters) and regenerate."""
    def go():
        desc = m.descriptor
        for ls in desc.lists:
            pts = [f.name for f in ls.fields if f.kind is FieldKind.POINT]
            for obj in m.lists[ls.name]:
                for p in pts:
                    x, y = obj[p]
                    obj[p] = (x + dx, y + dy)
        for f in desc.params:
            if f.kind is FieldKind.POINT:
                x, y = m.params[f.name]
                m.params[f.name] = (x + dx, y + dy)
    _mutate(m, go)
    return m


def regenerate(m: ModuleInstance, scale: DrawingScale | None = None) -> ModuleInstance:
    """Run the type's generator on the current state and cache its output."""
    bad = validate_integrity(m)
    if bad:
        raise IntegrityError(f"{m.type_name} {m.id}: dangling references {bad}")
    desc = m.descriptor
    try:
        out = desc.generator(m)
    except TcgxError as exc:
        raise GeneratorError(f"{m.type_name} {m.id}: {exc}") from exc
    scale = scale or DrawingScale(1)
    for i, e in enumerate(out.elements):
        try:
            check_element(e, scale)
        except TcgxError as exc:
            raise GeneratorError(f"{m.type_name} {m.id}: element {i} ({e.kind}): {exc}") from exc
    m.geometry = list(out.elements)
    m.spec_records = [SpecRecord(r.properties, r.quantity, ("", m.id, m.type_name)) for r in out.spec_records]
    m.snap_points = list(out.snap_points)
    return m


def as_element(m: ModuleInstance, space: Space = Space.NATURAL) -> ModuleRef:
    return ModuleRef(m, space)


def module_bbox(m: ModuleInstance, space=Space.NATURAL, ratio=1.0) -> Rect:
    return element_rect(as_element(m), space, ratio)


# ------------------------------------------------------- prototype files

def _j(v):
    return json.dumps(v, ensure_ascii=False)


def _to_json(f: FieldDef, v):
    return list(v) if f.kind is FieldKind.POINT else v


def dumps_proto(m: ModuleInstance) -> str:
    desc = m.descriptor
    out = [f"PROTO {_j(m.type_name)} {PROTO_VERSION}", f"ID {_j(m.id)}", "PARAMS"]
    for f in desc.params:
        out.append(f"{f.name} = {_j(_to_json(f, m.params[f.name]))}")
    for ls in desc.lists:
        out.append(f"LIST {ls.name}")
        for obj in m.lists[ls.name]:
            out.append(_j({f.name: _to_json(f, obj[f.name]) for f in ls.fields}))
    out.append("END")
    return "\n".join(out) + "\n"


_PROTO_HEAD = re.compile(r'PROTO (".*") (\S+)$')


def loads_proto(text: str, path=None, first_line: int = 1) -> ModuleInstance:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty prototype", path, first_line)
    mt = _PROTO_HEAD.match(lines[0].strip())
    if not mt:
        raise FormatError("expected 'PROTO \"<type>\" <version>'", path, first_line)
    type_name = json.loads(mt.group(1))
    try:
        ver = int(mt.group(2))
    except ValueError:
        raise VersionError(f"bad prototype version {mt.group(2)!r}", path, first_line) from None
    if ver != PROTO_VERSION:
        raise VersionError(f"unsupported prototype version {ver}", path, first_line)
    desc = descriptor(type_name)
    m = ModuleInstance(type_name, "M1", {ls.name: [] for ls in desc.lists}, {})
    section, cur = None, None
    for off, raw in enumerate(lines[1:], 1):
        s = raw.strip()
        where = (path, first_line + off)
        if not s:
            continue
        try:
            if s == "END":
                break
            if s.startswith("ID "):
                m.id = json.loads(s[3:])
            elif s == "PARAMS":
                section = "params"
            elif s.startswith("LIST "):
                section, cur = "list", s[5:].strip()
                desc.list_schema(cur)
            elif section == "params":
                name, _, val = s.partition(" = ")
                f = desc.param(name)
                m.params[name] = _check_value(f, json.loads(val), name)
            elif section == "list":
                vals = json.loads(s)
                ls = desc.list_schema(cur)
                if set(vals) != {f.name for f in ls.fields}:
                    raise IntegrityError(f"{cur}: fields {sorted(vals)} do not match the schema")
                m.lists[cur].append({f.name: _check_value(f, vals[f.name], f"{cur}.{f.name}") for f in ls.fields})
            else:
                raise FormatError(f"unexpected line {s!r}", *where)
        except (json.JSONDecodeError, IntegrityError) as exc:
            raise FormatError(str(exc), *where) from None
    missing = [f.name for f in desc.params if f.name not in m.params]
    if missing:
        raise FormatError(f"missing parameters {missing}", path)
    regenerate(m)
    return m


def _lib_path(lib, name) -> Path:
    if not re.fullmatch(r"[\w.-]+", name) or name.startswith("."):
        raise ValueError(f"invalid prototype name {name!r}")
    return Path(lib) / f"{name}.proto"


def save_prototype(lib, name: str, m: ModuleInstance) -> Path:
    p = _lib_path(lib, name)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_proto(m), encoding="utf-8")
    return p


def load_prototype(lib, name: str) -> ModuleInstance:
    p = _lib_path(lib, name)
    if not p.exists():
        raise NotFound(f"no prototype {name!r} in {lib}")
    return loads_proto(p.read_text(encoding="utf-8"), p)


def list_prototypes(lib) -> list[str]:
    return sorted(p.stem for p in Path(lib).glob("*.proto"))


# ------------------------------------------------------------ demo type

TRACE_TYPE = "Магистральная трасса"


def _trace_generator(m: ModuleInstance) -> GenOutput:
    """Polyline route with condition marks, one label per label object and
    one specifying record whose quantity is the route length in metres."""
    p = m.params
    nodes = [obj["p"] for obj in m.lists["nodes"]]
    out = GenOutput(snap_points=list(nodes))
    if len(nodes) < 2:
        return out
    out.elements.append(Magistral(nodes, p["mark_code"], p["mark_interval"], p["first_mark_offset"],
                                  Space.NATURAL, p["line_type"]))
    for lab in m.lists["labels"]:
        if not lab["text"]:
            continue
        x, y = nodes[lab["node"]] if lab["node"] is not None else (0.0, 0.0)
        out.elements.append(Text((x + lab["dx"], y + lab["dy"]), lab["text"], 3.5, 0, False, Space.NATURAL))
    length_m = UNITS.convert(path_length(nodes), "mm", "m")
    props = {
        "name": (p["name"], None),
        "designation": (p["designation"], None),
        "dn": (p["dn"], "mm"),
        "section": (p["section"], None),
        "mark": (p["mark_code"], None),
    }
    out.spec_records.append(SpecRecord(props, length_m))
    return out


TRACE = register(ModuleTypeDescriptor(
    TRACE_TYPE,
    lists=(
        ListSchema("nodes", (FieldDef("p", FieldKind.POINT, "mm", default=(0.0, 0.0)),)),
        ListSchema("labels", (
            FieldDef("text", FieldKind.TEXT, default=""),
            FieldDef("node", FieldKind.REF, target="nodes"),
            FieldDef("dx", FieldKind.NUMBER, "mm", default=0.0),
            FieldDef("dy", FieldKind.NUMBER, "mm", default=0.0),
        )),
    ),
    params=(
        FieldDef("mark_code", FieldKind.TEXT, setting=True, default="Т1"),
        FieldDef("mark_interval", FieldKind.NUMBER, "mm", setting=True, default=40.0),
        FieldDef("first_mark_offset", FieldKind.NUMBER, "mm", setting=True, default=20.0),
        FieldDef("line_type", FieldKind.LINETYPE, setting=True, default="solid"),
        FieldDef("name", FieldKind.TEXT, default="Трубопровод"),
        FieldDef("designation", FieldKind.TEXT, default=""),
        FieldDef("dn", FieldKind.NUMBER, "mm", default=57.0),
        FieldDef("section", FieldKind.TEXT, default="Трубы"),
    ),
    generator=_trace_generator,
))


INSTRUMENT_TYPE = "Прибор"


def _instrument_generator(m: ModuleInstance) -> GenOutput:
    """A square symbol with its position code at every placement; one
    specifying record counting the placements."""
    p = m.params
    half = p["size"] / 2
    out = GenOutput()
    for obj in m.lists["places"]:
        x, y = obj["p"]
        out.snap_points.append((x, y))
        out.elements.append(Polyline(
            [(x - half, y - half), (x + half, y - half), (x + half, y + half),
             (x - half, y + half), (x - half, y - half)], Space.NATURAL, "solid"))
        if obj["pos"]:
            out.elements.append(Text((x - half, y + half + 100.0), obj["pos"], 3.5, 0, False, Space.NATURAL))
    if m.lists["places"]:
        props = {
            "name": (p["name"], None),
            "designation": (p["designation"], None),
            "section": (p["section"], None),
            "p": (p["pressure"], p["pressure_unit"]),
        }
        out.spec_records.append(SpecRecord(props, float(len(m.lists["places"]))))
    return out


INSTRUMENT = register(ModuleTypeDescriptor(
    INSTRUMENT_TYPE,
    lists=(
        ListSchema("places", (
            FieldDef("p", FieldKind.POINT, "mm", default=(0.0, 0.0)),
            FieldDef("pos", FieldKind.TEXT, default=""),
        )),
    ),
    params=(
        FieldDef("size", FieldKind.NUMBER, "mm", setting=True, default=500.0),
        FieldDef("name", FieldKind.TEXT, default="Манометр"),
        FieldDef("designation", FieldKind.TEXT, default=""),
        FieldDef("section", FieldKind.TEXT, default="Приборы"),
        FieldDef("pressure", FieldKind.NUMBER, default=10.0),
        FieldDef("pressure_unit", FieldKind.TEXT, default="kgf/cm2"),
    ),
    generator=_instrument_generator,
))
