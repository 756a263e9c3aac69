"""Synthetic catalog corpus and the filter benchmark over it."""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .enkat.filters import apply_filter, parse_filter
from .enkat.rules import Menu
from .enkat.table import PROFILE_CODES, Column, ColumnKind, DataTable, InstrumentRank, cell_text

BUDGET_SECONDS = 1.0

CLASSES = (
    "Оборудование/Насос/Центробежный",
    "Оборудование/Насос/Поршневой",
    "Оборудование/Насосная станция",
    "Оборудование/Теплообменник",
    "Арматура/Задвижка",
    "Арматура/Клапан/Обратный",
    "Арматура/Клапан/Регулирующий",
    "Трубы/Стальные",
    "Трубы/Полиэтиленовые",
    "Детали трубопроводов/Отвод",
    "Детали трубопроводов/Фланец",
    "Приборы/Давление",
    "Приборы/Температура",
    "Приборы/Расход",
)
QSYMS = ("P", "T", "F", "L", "Q")
MATERIALS = ("Ст20", "Ст3", "09Г2С", "12Х18Н10Т", "ПЭ100")
P_UNITS = ("MPa", "kgf/cm2", "bar", "kPa")
T_UNITS = ("°C", "K")
DN = (15, 20, 25, 32, 40, 50, 57, 65, 76, 80, 89, 100, 108, 125, 150, 159, 200, 219, 250, 273)

BATTERY = (
    "profile=KIP",
    "profile=MT or profile=STR",
    "source=КАТ-017",
    "qsym=P",
    "rank=primary",
    "class=Оборудование/Насос",
    "[p] in 0.5..1.6 MPa",
    "[t] in 100..300 °C",
    "[dn]=57",
    "[material]=09Г2С",
    "class=Арматура and [p] in 1..4 MPa and not rank=secondary",
    "(qsym=T or qsym=P) and [t] in 250..400 K",
)


@dataclass(frozen=True)
class BenchSpec:
    n_tables: int = 265
    n_rows_total: int = 68213
    seed: int = 20240601

    def __post_init__(self):
        if self.n_tables < 1 or self.n_rows_total < self.n_tables:
            raise ValueError("need at least one row per table")


def table_sizes(spec: BenchSpec, rng) -> list[int]:
    """Random positive sizes summing exactly to the row total."""
    cuts = np.sort(rng.choice(np.arange(1, spec.n_rows_total), spec.n_tables - 1, replace=False))
    edges = np.concatenate(([0], cuts, [spec.n_rows_total]))
    return np.diff(edges).astype(int).tolist()


def _table(k: int, n: int, rng) -> DataTable:
    p_unit = P_UNITS[rng.integers(len(P_UNITS))]
    t_unit = T_UNITS[rng.integers(len(T_UNITS))]
    cols = [
        Column("name", ColumnKind.TEXT, None, "Наименование"),
        Column("designation", ColumnKind.TEXT, None, "Обозначение"),
        Column("dn", ColumnKind.NUMBER, "mm", "Ду"),
        Column("p", ColumnKind.NUMBER, p_unit, "Ру"),
        Column("t", ColumnKind.NUMBER, t_unit, "Т"),
        Column("material", ColumnKind.MENU, None, "Материал"),
    ]
    to_p = {"MPa": 1.0, "kgf/cm2": 1 / 0.0980665, "bar": 10.0, "kPa": 1000.0}[p_unit]
    dn = np.asarray(DN)[rng.integers(len(DN), size=n)]
    # pressures on a 0.1 MPa grid, expressed in the table's unit and rounded
    # the way a printed catalog would be
    p = np.round(rng.integers(1, 64, size=n) / 10 * to_p, 3)
    t_c = rng.integers(-60, 46, size=n) * 10
    t = t_c + (273.15 if t_unit == "K" else 0.0)
    mats = rng.integers(len(MATERIALS), size=(n, 2))
    base_cls = CLASSES[rng.integers(len(CLASSES))]
    rows, classes, qsyms, ranks = [], [], [], []
    for i in range(n):
        a, b = mats[i]
        menu = Menu(dict.fromkeys((MATERIALS[a], MATERIALS[b])))
        rows.append([f"Изделие {k}-{i}", f"КАТ-{k:03d}.{i:05d}", float(dn[i]), float(p[i]), float(t[i]),
                     menu])
        classes.append(base_cls if rng.random() < 0.8 else CLASSES[rng.integers(len(CLASSES))])
        qsyms.append(QSYMS[rng.integers(len(QSYMS))] if classes[-1].startswith("Приборы") else None)
        ranks.append(InstrumentRank.PRIMARY if qsyms[-1] and rng.random() < 0.5
                     else InstrumentRank.SECONDARY if qsyms[-1] else InstrumentRank.NONE)
    n_tags = 1 + int(rng.integers(2))
    tags = frozenset(PROFILE_CODES[j] for j in rng.choice(3, n_tags, replace=False))
    return DataTable(f"T{k:03d}", cols, rows, f"КАТ-{k % 40:03d}", tags, classes, qsyms, ranks)


def make_corpus(spec: BenchSpec = BenchSpec()) -> list[DataTable]:
    rng = np.random.default_rng(spec.seed)
    return [_table(k, n, rng) for k, n in enumerate(table_sizes(spec, rng))]


def corpus_hash(tables) -> str:
    h = hashlib.sha256()
    for t in tables:
        h.update(f"{t.id}\t{t.source_catalog}\t{','.join(sorted(t.profile_tags))}\n".encode())
        h.update(("\t".join(f"{c.key}:{c.kind_text()}" for c in t.columns) + "\n").encode())
        for i, r in enumerate(t.rows):
            cells = [cell_text(v) for v in r]
            cells += [t.classification[i], t.quantity_symbol[i] or "", t.instrument_rank[i].value]
            h.update(("\t".join(cells) + "\n").encode())
    return h.hexdigest()


def prepare(tables) -> None:
    """Build the per-column number arrays the vectorized filters read."""
    for t in tables:
        for c in t.columns:
            if c.kind is ColumnKind.NUMBER:
                t.numbers(c.key)


def run_filter(tables, f) -> dict[str, list[int]]:
    out = {}
    for t in tables:
        hits = apply_filter(t, f)
        if hits:
            out[t.id] = hits
    return out


@dataclass
class BenchReport:
    n_tables: int
    n_rows: int
    corpus_hash: str
    prepare_seconds: float
    timings: list  # (expression, hits, seconds)
    oracle_rows: int = 0
    mismatches: int = 0

    @property
    def battery_seconds(self):
        return sum(s for _, _, s in self.timings)

    def text(self) -> str:
        lines = [
            f"corpus: {self.n_tables} tables, {self.n_rows} rows, sha256 {self.corpus_hash}",
            f"prepare: {self.prepare_seconds:.4f} s",
        ]
        for expr, hits, s in self.timings:
            lines.append(f"{s:.4f} s  {hits:6d} rows  {expr}")
        lines.append(f"battery: {self.battery_seconds:.4f} s (budget {BUDGET_SECONDS:g} s)")
        lines.append(f"oracle: {self.oracle_rows} sampled rows, {self.mismatches} mismatches")
        return "\n".join(lines) + "\n"


def oracle_check(tables, filters, fraction=0.01, seed=0) -> tuple[int, int]:
    """Compare vectorized results with the per-row reference on a random
    sample of rows.  Returns (rows checked per filter, mismatches)."""
    rng = np.random.default_rng(seed)
    sample = {t.id: np.flatnonzero(rng.random(len(t)) < fraction).tolist() for t in tables}
    bad = 0
    for f in filters:
        for t in tables:
            idx = sample[t.id]
            if not idx:
                continue
            fast = set(apply_filter(t, f))
            f.bind(t)
            bad += sum((i in fast) != f.test(t, i) for i in idx)
    return sum(len(v) for v in sample.values()), bad


def bench_catalog(spec: BenchSpec = BenchSpec(), battery=BATTERY, oracle_fraction=0.01) -> BenchReport:
    tables = make_corpus(spec)
    t0 = time.perf_counter()
    prepare(tables)
    prep = time.perf_counter() - t0
    filters = [(e, parse_filter(e)) for e in battery]
    timings = []
    for expr, f in filters:
        t0 = time.perf_counter()
        res = run_filter(tables, f)
        timings.append((expr, sum(len(v) for v in res.values()), time.perf_counter() - t0))
    rep = BenchReport(len(tables), sum(len(t) for t in tables), corpus_hash(tables), prep, timings)
    if oracle_fraction:
        rep.oracle_rows, rep.mismatches = oracle_check(tables, [f for _, f in filters], oracle_fraction, spec.seed)
    return rep
