"""Catalog data tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ChoiceNotInMenu, FormatError, MissingChoice, UnknownColumn
from .rules import Menu, format_number
from .units import UNITS

PROFILE_CODES = ("MT", "KIP", "STR", "EL", "REG")
MENU_OPEN, MENU_CLOSE = "⟨", "⟩"


class ColumnKind(str, Enum):
    TEXT = "text"
    NUMBER = "num"
    MENU = "menu"


class InstrumentRank(str, Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"
    NONE = "none"


@dataclass(frozen=True)
class Column:
    key: str
    kind: ColumnKind = ColumnKind.TEXT
    unit: str | None = None
    title: str = ""

    def kind_text(self) -> str:
        return f"num:{self.unit}" if self.kind is ColumnKind.NUMBER else self.kind.value


# reserved per-row attribute columns in table.tsv
CLASS_KEY, QSYM_KEY, RANK_KEY = "_class", "_qsym", "_rank"
RESERVED = (CLASS_KEY, QSYM_KEY, RANK_KEY)


@dataclass
class DataTable:
    id: str
    columns: list
    rows: list = field(default_factory=list)  # list of lists, one value per column
    source_catalog: str = ""
    profile_tags: frozenset = frozenset()
    classification: list = field(default_factory=list)  # per row, "a/b/c"
    quantity_symbol: list = field(default_factory=list)  # per row, str or None
    instrument_rank: list = field(default_factory=list)  # per row, InstrumentRank
    _numcache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.rows)
        if not self.classification:
            self.classification = [""] * n
        if not self.quantity_symbol:
            self.quantity_symbol = [None] * n
        if not self.instrument_rank:
            self.instrument_rank = [InstrumentRank.NONE] * n
        self.profile_tags = frozenset(self.profile_tags)
        self._index = {c.key: i for i, c in enumerate(self.columns)}
        if len(self._index) != len(self.columns):
            raise ValueError(f"table {self.id}: duplicate column keys")
        self.check()

    def __len__(self):
        return len(self.rows)

    @property
    def keys(self):
        return [c.key for c in self.columns]

    def column(self, key) -> Column:
        try:
            return self.columns[self._index[key]]
        except KeyError:
            raise UnknownColumn(f"table {self.id} has no column {key!r}") from None

    def col_index(self, key) -> int:
        self.column(key)
        return self._index[key]

    def row(self, i) -> dict:
        return dict(zip(self.keys, self.rows[i]))

    def numbers(self, key) -> np.ndarray:
        """Float column as an array (cached; tables are immutable once loaded)."""
        arr = self._numcache.get(key)
        if arr is None:
            j = self.col_index(key)
            arr = np.array([r[j] for r in self.rows], dtype=float)
            self._numcache[key] = arr
        return arr

    def texts(self, key) -> np.ndarray:
        arr = self._numcache.get(("t", key))
        if arr is None:
            j = self.col_index(key)
            arr = np.array([cell_text(r[j]) for r in self.rows], dtype=object)
            self._numcache[("t", key)] = arr
        return arr

    def check(self):
        n = len(self.rows)
        if not (len(self.classification) == len(self.quantity_symbol) == len(self.instrument_rank) == n):
            raise ValueError(f"table {self.id}: per-row attribute lists differ in length")
        for i, r in enumerate(self.rows):
            if len(r) != len(self.columns):
                raise ValueError(f"table {self.id} row {i}: {len(r)} values for {len(self.columns)} columns")
            for c, v in zip(self.columns, r):
                if c.kind is ColumnKind.NUMBER and not (isinstance(v, float) and math.isfinite(v)):
                    raise ValueError(f"table {self.id} row {i}: [{c.key}] is not a finite number")
                if c.kind is ColumnKind.MENU and not (isinstance(v, Menu) and len(v) > 0):
                    raise ValueError(f"table {self.id} row {i}: [{c.key}] is not a menu")


def cell_text(v) -> str:
    if isinstance(v, Menu):
        return MENU_OPEN + "|".join(v) + MENU_CLOSE
    if isinstance(v, float):
        return format_number(v)
    return "" if v is None else str(v)


def parse_cell(text: str, col: Column, where=None):
    s = text
    if col.kind is ColumnKind.MENU:
        if not (s.startswith(MENU_OPEN) and s.endswith(MENU_CLOSE)):
            raise FormatError(f"[{col.key}] expects a menu cell ⟨a|b|...⟩, got {s!r}", *(where or ()))
        opts = [o for o in s[1:-1].split("|")]
        if not opts or any(not o for o in opts) or len(set(opts)) != len(opts):
            raise FormatError(f"[{col.key}] menu options must be nonempty and unique", *(where or ()))
        return Menu(opts)
    if col.kind is ColumnKind.NUMBER:
        try:
            v = float(s.replace(",", "."))
        except ValueError:
            raise FormatError(f"[{col.key}] expects a number, got {s!r}", *(where or ())) from None
        if not math.isfinite(v):
            raise FormatError(f"[{col.key}] is not finite", *(where or ()))
        return v
    return s


def parse_kind(text: str, key: str, where=None) -> tuple[ColumnKind, str | None]:
    t = text.strip()
    if t == "text":
        return ColumnKind.TEXT, None
    if t == "menu":
        return ColumnKind.MENU, None
    if t.startswith("num:"):
        unit = t[4:].strip()
        try:
            UNITS.get(unit)
        except KeyError as exc:
            raise FormatError(f"column {key}: {exc}", *(where or ())) from None
        return ColumnKind.NUMBER, unit
    raise FormatError(f"column {key}: unknown kind {t!r}", *(where or ()))


def resolve_embedded(t: DataTable, row_index: int, choices: dict) -> dict:
    """Row as a dict with each menu cell replaced by its chosen option."""
    row = t.row(row_index)
    for k in choices:
        t.column(k)
    out = {}
    for k, v in row.items():
        if isinstance(v, Menu):
            if k not in choices:
                raise MissingChoice(f"row {row_index}: no choice given for menu cell [{k}]")
            c = str(choices[k])
            if c not in v:
                raise ChoiceNotInMenu(f"{c!r} is not one of {'|'.join(v)} in [{k}]")
            v = c
        out[k] = v
    return out
