"""Row filters over catalog tables.

Every filter evaluates two ways: :meth:`mask` works on whole columns with
numpy and is what :func:`apply_filter` uses; :meth:`test` checks one row in
plain Python and serves as the reference path.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import FilterError
from .rules import Menu
from .table import ColumnKind, DataTable, InstrumentRank, PROFILE_CODES
from .units import UNITS


class Filter:
    def bind(self, t: DataTable) -> None:
        pass

    def mask(self, t: DataTable) -> np.ndarray:
        raise NotImplementedError

    def test(self, t: DataTable, i: int) -> bool:
        raise NotImplementedError

    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


def _full(t, value):
    return np.full(len(t), bool(value), dtype=bool)


@dataclass(frozen=True)
class And(Filter):
    parts: tuple = ()

    def bind(self, t):
        for p in self.parts:
            p.bind(t)

    def mask(self, t):
        m = _full(t, True)
        for p in self.parts:
            if not m.any():
                break
            m &= p.mask(t)
        return m

    def test(self, t, i):
        return all(p.test(t, i) for p in self.parts)


@dataclass(frozen=True)
class Or(Filter):
    parts: tuple = ()

    def bind(self, t):
        for p in self.parts:
            p.bind(t)

    def mask(self, t):
        m = _full(t, False)
        for p in self.parts:
            m |= p.mask(t)
        return m

    def test(self, t, i):
        return any(p.test(t, i) for p in self.parts)


@dataclass(frozen=True)
class Not(Filter):
    part: Filter

    def bind(self, t):
        self.part.bind(t)

    def mask(self, t):
        return ~self.part.mask(t)

    def test(self, t, i):
        return not self.part.test(t, i)


@dataclass(frozen=True)
class ProfileIs(Filter):
    code: str

    def __post_init__(self):
        if self.code not in PROFILE_CODES:
            raise FilterError(f"unknown profile code {self.code!r}")

    def mask(self, t):
        return _full(t, self.code in t.profile_tags)

    def test(self, t, i):
        return self.code in t.profile_tags


@dataclass(frozen=True)
class SourceCatalogIs(Filter):
    name: str

    def mask(self, t):
        return _full(t, t.source_catalog == self.name)

    def test(self, t, i):
        return t.source_catalog == self.name


@dataclass(frozen=True)
class QuantitySymbolIs(Filter):
    symbol: str

    def mask(self, t):
        return np.fromiter((s == self.symbol for s in t.quantity_symbol), bool, len(t))

    def test(self, t, i):
        return t.quantity_symbol[i] == self.symbol


@dataclass(frozen=True)
class InstrumentRankIs(Filter):
    rank: InstrumentRank

    def __post_init__(self):
        object.__setattr__(self, "rank", InstrumentRank(self.rank))

    def mask(self, t):
        return np.fromiter((r is self.rank for r in t.instrument_rank), bool, len(t))

    def test(self, t, i):
        return t.instrument_rank[i] is self.rank


def _path_parts(path):
    return [p for p in path.strip("/").split("/") if p]


@dataclass(frozen=True)
class ClassPrefix(Filter):
    """Rows whose classification path starts with whole components of ``path``."""

    path: str

    def mask(self, t):
        p = "/".join(_path_parts(self.path))
        if not p:
            return _full(t, True)
        sub = p + "/"
        return np.fromiter((c == p or c.startswith(sub) for c in t.classification), bool, len(t))

    def test(self, t, i):
        want = _path_parts(self.path)
        have = _path_parts(t.classification[i])
        return have[:len(want)] == want


@dataclass(frozen=True)
class Interval(Filter):
    """lo <= value <= hi, bounds given in ``unit`` and converted to the
    column's own unit before comparing."""

    key: str
    lo: float
    hi: float
    unit: str

    def bind(self, t):
        c = t.column(self.key)
        if c.kind is not ColumnKind.NUMBER:
            raise FilterError(f"interval filter on non-numeric column [{self.key}]")
        UNITS.convert(1.0, self.unit, c.unit)

    def bounds(self, t):
        # bounds are the decimals the user typed; convert them exactly and
        # round once, so 1.6 MPa is exactly 16 bar
        u = t.column(self.key).unit
        lo = UNITS.convert_exact(Fraction(repr(self.lo)), self.unit, u)
        hi = UNITS.convert_exact(Fraction(repr(self.hi)), self.unit, u)
        return float(lo), float(hi)

    def mask(self, t):
        lo, hi = self.bounds(t)
        v = t.numbers(self.key)
        return (v >= lo) & (v <= hi)

    def test(self, t, i):
        lo, hi = self.bounds(t)
        v = t.rows[i][t.col_index(self.key)]
        return lo <= v <= hi


@dataclass(frozen=True)
class ColumnEquals(Filter):
    """Cell equals ``value``; numeric columns compare as numbers, menu cells
    match when ``value`` is one of their options."""

    key: str
    value: object

    def bind(self, t):
        c = t.column(self.key)
        if c.kind is ColumnKind.NUMBER:
            self._number()

    def _number(self):
        try:
            return float(str(self.value).replace(",", "."))
        except ValueError:
            raise FilterError(f"[{self.key}] compares numbers, got {self.value!r}") from None

    def mask(self, t):
        c = t.column(self.key)
        if c.kind is ColumnKind.NUMBER:
            return t.numbers(self.key) == self._number()
        if c.kind is ColumnKind.MENU:
            j = t.col_index(self.key)
            s = str(self.value)
            return np.fromiter((s in r[j] for r in t.rows), bool, len(t))
        return t.texts(self.key) == str(self.value)

    def test(self, t, i):
        c = t.column(self.key)
        v = t.rows[i][t.col_index(self.key)]
        if c.kind is ColumnKind.NUMBER:
            return v == self._number()
        if isinstance(v, Menu):
            return str(self.value) in v
        return v == str(self.value)


def apply_filter(t: DataTable, f: Filter) -> list[int]:
    f.bind(t)
    return np.flatnonzero(f.mask(t)).tolist()


def brute_force_filter(t: DataTable, f: Filter) -> list[int]:
    f.bind(t)
    return [i for i in range(len(t)) if f.test(t, i)]


# ------------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    \s*(?:
      (?P<str>"(?:[^"\\]|\\.)*")
    | (?P<col>\[[^\]]+\])
    | (?P<op>\(|\)|=)
    | (?P<word>[^\s()="\[\]]+)
    )""", re.X)


def _tokens(text):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FilterError(f"cannot tokenize filter at position {pos}: {text[pos:]!r}")
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "str":
            val = re.sub(r"\\(.)", r"\1", val[1:-1])
        out.append((kind, val))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        k, v = self.peek()
        if k is None or (kind and k != kind) or (value is not None and v != value):
            want = value or kind or "token"
            raise FilterError(f"expected {want!r}, got {v!r}")
        self.i += 1
        return v

    def value(self):
        k, v = self.peek()
        if k in ("str", "word"):
            self.i += 1
            return v
        raise FilterError(f"expected a value, got {v!r}")

    def expr(self):
        parts = [self.term()]
        while self.peek() == ("word", "or"):
            self.i += 1
            parts.append(self.term())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def term(self):
        parts = [self.factor()]
        while self.peek() == ("word", "and"):
            self.i += 1
            parts.append(self.factor())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def factor(self):
        k, v = self.peek()
        if (k, v) == ("word", "not"):
            self.i += 1
            return Not(self.factor())
        if (k, v) == ("op", "("):
            self.i += 1
            e = self.expr()
            self.take("op", ")")
            return e
        if (k, v) == ("word", "true"):
            self.i += 1
            return And(())
        if k == "col":
            key = v[1:-1].strip()
            self.i += 1
            k2, v2 = self.peek()
            if (k2, v2) == ("op", "="):
                self.i += 1
                return ColumnEquals(key, self.value())
            if (k2, v2) == ("word", "in"):
                self.i += 1
                rng = self.value()
                if ".." in rng:
                    lo, hi = rng.split("..", 1)
                else:
                    lo = rng
                    self.take("word", "..")
                    hi = self.value()
                unit = self.value()
                try:
                    return Interval(key, float(lo), float(hi), unit)
                except ValueError:
                    raise FilterError(f"bad interval bounds {lo!r}..{hi!r}") from None
            raise FilterError(f"expected '=' or 'in' after [{key}]")
        if k == "word":
            self.i += 1
            self.take("op", "=")
            val = self.value()
            if v == "profile":
                return ProfileIs(val)
            if v == "source":
                return SourceCatalogIs(val)
            if v == "qsym":
                return QuantitySymbolIs(val)
            if v == "rank":
                try:
                    return InstrumentRankIs(InstrumentRank(val))
                except ValueError:
                    raise FilterError(f"unknown instrument rank {val!r}") from None
            if v == "class":
                return ClassPrefix(val)
            raise FilterError(f"unknown filter attribute {v!r}")
        raise FilterError(f"unexpected token {v!r}")


def parse_filter(text: str) -> Filter:
    """Parse a filter expression, e.g.
    ``class=Оборудование/Насос and [p] in 0.5..1.0 MPa and not rank=secondary``.
    An empty expression selects everything."""
    if not text.strip():
        return And(())
    p = _Parser(text)
    f = p.expr()
    if p.i != len(p.toks):
        raise FilterError(f"trailing input after filter: {p.toks[p.i][1]!r}")
    return f
