"""Catalog bundles on disk.

A bundle is a directory holding::

    table.tsv   row 1 column keys, row 2 kinds (text | num:<unit> | menu),
                then one row per product; reserved keys _class, _qsym, _rank
                carry the classification path, measured-quantity symbol and
                primary/secondary instrument flag
    rules.txt   lines ``col := <rule>``
    menus.txt   lines ``Name = opt|opt|...``
    meta.txt    ``id``, ``source``, ``profiles`` and optional ``column <key> <title>``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import FormatError, RuleSyntaxError, UnknownColumn, UnknownMenu, UnknownVariable
from .rules import Menu, RuleSet, ScriptedInput, bind_ruleset, eval_rules, parse_ruleset
from .table import (
    CLASS_KEY,
    PROFILE_CODES,
    QSYM_KEY,
    RANK_KEY,
    Column,
    ColumnKind,
    DataTable,
    InstrumentRank,
    cell_text,
    parse_cell,
    parse_kind,
    resolve_embedded,
)


@dataclass
class Catalog:
    table: DataTable
    rules: RuleSet = field(default_factory=RuleSet)
    menus: dict = field(default_factory=dict)
    path: Path | None = None

    @property
    def id(self):
        return self.table.id

    def pick(self, row_index: int, provider, choices=None) -> tuple[dict, dict]:
        return eval_ruleset(self.table, row_index, self.rules, provider, self.menus, choices)


def eval_ruleset(t: DataTable, row_index: int, rs: RuleSet, provider, menus=None, choices=None):
    """Evaluate ``rs`` on one row.  Returns (column -> text, variables)."""
    if not 0 <= row_index < len(t):
        raise IndexError(f"table {t.id} has no row {row_index}")
    if choices is not None:
        row = resolve_embedded(t, row_index, choices)
    else:
        row = t.row(row_index)
    return eval_rules(rs, row, menus or {}, provider)


def pick_with_answers(cat: Catalog, row_index: int, answers, choices=None):
    return cat.pick(row_index, ScriptedInput(answers), choices)


# ---------------------------------------------------------------------- I/O

def _read_lines(path: Path):
    if not path.exists():
        return []
    return path.read_text(encoding="utf-8").splitlines()


def _num_text(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def load_catalog(path) -> Catalog:
    d = Path(path)
    if not d.is_dir():
        raise FormatError("catalog bundle directory not found", d)

    meta_path = d / "meta.txt"
    cid, source, tags, titles = d.name, "", set(), {}
    for lineno, line in enumerate(_read_lines(meta_path), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        word, _, rest = s.partition(" ")
        rest = rest.strip()
        if word == "id":
            cid = rest
        elif word == "source":
            source = rest
        elif word == "profiles":
            tags = {x.strip() for x in rest.split(",") if x.strip()}
            bad = tags - set(PROFILE_CODES)
            if bad:
                raise FormatError(f"unknown profile codes {sorted(bad)}", meta_path, lineno)
        elif word == "column":
            key, _, title = rest.partition(" ")
            titles[key] = title.strip()
        else:
            raise FormatError(f"unknown meta field {word!r}", meta_path, lineno)

    menus_path = d / "menus.txt"
    menus = {}
    for lineno, line in enumerate(_read_lines(menus_path), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        name, eq, opts = s.partition("=")
        name = name.strip()
        options = [o.strip() for o in opts.split("|")]
        if not eq or not name or not all(options) or len(set(options)) != len(options):
            raise FormatError("expected 'Name = opt|opt|...' with unique nonempty options", menus_path, lineno)
        if name in menus:
            raise FormatError(f"duplicate menu {name!r}", menus_path, lineno)
        menus[name] = tuple(options)

    table_path = d / "table.tsv"
    lines = _read_lines(table_path)
    if len(lines) < 2:
        raise FormatError("table.tsv needs a key row and a kind row", table_path)
    keys = lines[0].split("\t")
    kinds = lines[1].split("\t")
    if len(kinds) != len(keys):
        raise FormatError("kind row length differs from key row", table_path, 2)
    columns, reserved = [], {}
    for j, (k, kind) in enumerate(zip(keys, kinds)):
        k = k.strip()
        if k in (CLASS_KEY, QSYM_KEY, RANK_KEY):
            reserved[k] = j
            continue
        ck, unit = parse_kind(kind, k, (table_path, 2))
        columns.append((j, Column(k, ck, unit, titles.get(k, ""))))
    rows, classes, qsyms, ranks = [], [], [], []
    for lineno, line in enumerate(lines[2:], 3):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(keys):
            raise FormatError(f"{len(cells)} cells for {len(keys)} columns", table_path, lineno)
        rows.append([parse_cell(cells[j], c, (table_path, lineno)) for j, c in columns])
        classes.append(cells[reserved[CLASS_KEY]] if CLASS_KEY in reserved else "")
        q = cells[reserved[QSYM_KEY]] if QSYM_KEY in reserved else ""
        qsyms.append(q or None)
        r = cells[reserved[RANK_KEY]] if RANK_KEY in reserved else ""
        try:
            ranks.append(InstrumentRank(r or "none"))
        except ValueError:
            raise FormatError(f"bad instrument rank {r!r}", table_path, lineno) from None
    try:
        table = DataTable(cid, [c for _, c in columns], rows, source, frozenset(tags),
                          classes, qsyms, ranks)
    except ValueError as exc:
        raise FormatError(str(exc), table_path) from None

    rules_path = d / "rules.txt"
    rules = parse_ruleset(_read_lines(rules_path), rules_path)
    try:
        bind_ruleset(rules, set(table.keys), menus)
    except (UnknownColumn, UnknownMenu, UnknownVariable) as exc:
        line = _rule_line(rules_path, str(exc))
        raise type(exc)(f"{rules_path}:{line}: {exc}") from None
    return Catalog(table, rules, menus, d)


def _rule_line(path, msg):
    # locate the offending rule by its column key quoted in the message
    for lineno, line in enumerate(_read_lines(path), 1):
        key = line.split(":=", 1)[0].strip()
        if key and f"rule {key!r}" in msg:
            return lineno
    return "?"


def save_catalog(cat: Catalog, path) -> None:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    t = cat.table
    meta = [f"id {t.id}"]
    if t.source_catalog:
        meta.append(f"source {t.source_catalog}")
    meta.append("profiles " + ",".join(c for c in PROFILE_CODES if c in t.profile_tags))
    meta += [f"column {c.key} {c.title}" for c in t.columns if c.title]
    (d / "meta.txt").write_text("\n".join(meta) + "\n", encoding="utf-8")

    keys = t.keys + [CLASS_KEY, QSYM_KEY, RANK_KEY]
    kinds = [c.kind_text() for c in t.columns] + ["text"] * 3
    out = ["\t".join(keys), "\t".join(kinds)]
    for i, r in enumerate(t.rows):
        cells = [_num_text(v) if isinstance(v, float) else cell_text(v) for v in r]
        cells += [t.classification[i], t.quantity_symbol[i] or "", t.instrument_rank[i].value]
        for c in cells:
            if "\t" in c or "\n" in c:
                raise FormatError(f"row {i}: cell {c!r} contains a tab or newline")
        out.append("\t".join(cells))
    (d / "table.tsv").write_text("\n".join(out) + "\n", encoding="utf-8")
    (d / "menus.txt").write_text("".join(f"{n} = {'|'.join(o)}\n" for n, o in cat.menus.items()),
                                 encoding="utf-8")
    (d / "rules.txt").write_text(cat.rules.to_text(), encoding="utf-8")


def bundle_bytes(path) -> dict:
    d = Path(path)
    return {n: (d / n).read_bytes() for n in ("meta.txt", "table.tsv", "menus.txt", "rules.txt")
            if (d / n).exists()}


__all__ = ["Catalog", "Menu", "ColumnKind", "RuleSyntaxError", "eval_ruleset", "load_catalog",
           "save_catalog", "pick_with_answers", "bundle_bytes"]
