import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ref_filter
from tcgx.enkat.filters import (
    And,
    ClassPrefix,
    ColumnEquals,
    Interval,
    Not,
    Or,
    ProfileIs,
    QuantitySymbolIs,
    apply_filter,
    brute_force_filter,
    parse_filter,
)
from tcgx.enkat.rules import Menu
from tcgx.enkat.table import Column, ColumnKind, DataTable, InstrumentRank
from tcgx.enkat.units import convert
from tcgx.errors import FilterError, UnknownColumn, UnknownUnit


def small():
    cols = [Column("name"), Column("p", ColumnKind.NUMBER, "kgf/cm2"), Column("t", ColumnKind.NUMBER, "°C"),
            Column("mat", ColumnKind.MENU)]
    rows = [
        ["Насос", 8.0, 20.0, Menu(("Ст20", "09Г2С"))],
        ["Насос", 16.0, 150.0, Menu(("Ст3",))],
        ["Задвижка", 40.0, -20.0, Menu(("Ст20",))],
        ["Манометр", 2.5, 80.0, Menu(("Ст20",))],
    ]
    return DataTable("T", cols, rows, "КАТ-1", {"MT", "KIP"},
                     ["Оборудование/Насос/Центробежный", "Оборудование/Насосная станция",
                      "Арматура/Задвижка", "Приборы/Давление"],
                     [None, None, None, "P"],
                     [InstrumentRank.NONE] * 3 + [InstrumentRank.PRIMARY])


def test_spec_examples():
    t = small()
    assert apply_filter(t, ClassPrefix("Оборудование/Насос")) == [0]
    assert apply_filter(t, ClassPrefix("Оборудование/Нас")) == []
    assert apply_filter(t, And(())) == [0, 1, 2, 3]
    # 8 kgf/cm2 = 0.784532 MPa
    assert apply_filter(t, Interval("p", 0.5, 1.0, "MPa")) == [0]


def test_parsed_expressions():
    t = small()
    cases = {
        "": [0, 1, 2, 3],
        "profile=KIP": [0, 1, 2, 3],
        "profile=STR": [],
        "source=КАТ-1": [0, 1, 2, 3],
        "qsym=P": [3],
        "rank=primary": [3],
        "not rank=primary": [0, 1, 2],
        "class=Оборудование": [0, 1],
        "[name]=Насос": [0, 1],
        "[mat]=Ст20": [0, 2, 3],
        "[p]=16": [1],
        "[t] in 0..100 °C": [0, 3],
        "[t] in 273.15..373.15 K": [0, 3],
        "[p] in 1.5 .. 4 MPa": [1, 2],
        "(qsym=P or [name]=Задвижка) and [t] in -30..100 °C": [2, 3],
        "true and not (class=Арматура or class=Приборы)": [0, 1],
    }
    for expr, want in cases.items():
        f = parse_filter(expr)
        assert apply_filter(t, f) == want, expr
        assert brute_force_filter(t, f) == want, expr
        assert [i for i in range(len(t)) if ref_filter(f, t, i)] == want, expr


@pytest.mark.parametrize("expr", ["[p] in 1..", "class", "profile=XX", "rank=tertiary", "[p] >= 3",
                                  "foo=1", "(profile=MT", "profile=MT profile=KIP", "[p] in a..b MPa"])
def test_parse_errors(expr):
    with pytest.raises((FilterError, ValueError)):
        apply_filter(small(), parse_filter(expr))


def test_binding_errors():
    t = small()
    with pytest.raises(FilterError):
        apply_filter(t, Interval("name", 0, 1, "MPa"))
    with pytest.raises(UnknownColumn):
        apply_filter(t, ColumnEquals("nope", "x"))
    with pytest.raises(UnknownUnit):
        apply_filter(t, Interval("p", 0, 1, "parsec"))
    with pytest.raises(FilterError):
        apply_filter(t, ColumnEquals("p", "abc"))


def test_interval_bound_in_other_unit_is_exact():
    cols = [Column("p", ColumnKind.NUMBER, "bar")]
    t = DataTable("B", cols, [[16.0], [15.9], [16.1]])
    assert apply_filter(t, Interval("p", 1.6, 2.0, "MPa")) == [0, 2]
    assert apply_filter(t, Interval("p", 0.0, 1.6, "MPa")) == [0, 1]


P_UNITS = ("MPa", "kgf/cm2", "bar", "kPa")


@st.composite
def tables(draw):
    n = draw(st.integers(0, 30))
    unit = draw(st.sampled_from(P_UNITS))
    vals = draw(st.lists(st.integers(0, 400), min_size=n, max_size=n))
    classes = draw(st.lists(st.sampled_from(["A/B", "A/B/C", "A/BC", "D", ""]), min_size=n, max_size=n))
    qs = draw(st.lists(st.sampled_from([None, "P", "T"]), min_size=n, max_size=n))
    rows = [[v / 10, f"n{v % 3}"] for v in vals]
    cols = [Column("p", ColumnKind.NUMBER, unit), Column("name")]
    tags = draw(st.frozensets(st.sampled_from(["MT", "KIP", "STR"])))
    return DataTable("R", cols, rows, "S", tags, classes, qs, [InstrumentRank.NONE] * n)


atoms = st.one_of(
    st.builds(ProfileIs, st.sampled_from(["MT", "KIP", "STR"])),
    st.builds(QuantitySymbolIs, st.sampled_from(["P", "T"])),
    st.builds(ClassPrefix, st.sampled_from(["A", "A/B", "A/BC", "D", "", "A/B/C"])),
    st.builds(ColumnEquals, st.just("name"), st.sampled_from(["n0", "n1", "x"])),
    st.builds(lambda lo, w, u: Interval("p", lo / 10, (lo + w) / 10, u),
              st.integers(0, 400), st.integers(0, 200), st.sampled_from(P_UNITS)),
)
filters = st.recursive(atoms, lambda s: st.one_of(
    st.builds(lambda a, b: And((a, b)), s, s),
    st.builds(lambda a, b: Or((a, b)), s, s),
    st.builds(Not, s)), max_leaves=6)


@settings(max_examples=300)
@given(tables(), filters)
def test_vectorized_matches_oracles(t, f):
    fast = apply_filter(t, f)
    assert fast == brute_force_filter(t, f)
    assert fast == [i for i in range(len(t)) if ref_filter(f, t, i)]


@given(tables(), st.integers(0, 400), st.integers(0, 200), st.sampled_from(P_UNITS), st.sampled_from(P_UNITS))
def test_conversion_invariance(t, lo, w, u1, u2):
    """Bounds restated in another unit select the same rows; only a cell
    sitting on a bound may flip, by rounding of the restated bound."""
    a = Interval("p", lo / 10, (lo + w) / 10, u1)
    b = Interval("p", convert(lo / 10, u1, u2), convert((lo + w) / 10, u1, u2), u2)
    ra, rb = apply_filter(t, a), apply_filter(t, b)
    vals = np.array([convert(r[0], t.columns[0].unit, u1) for r in t.rows])
    near = [i for i in set(ra) ^ set(rb)
            if min(abs(vals[i] - lo / 10), abs(vals[i] - (lo + w) / 10)) > 1e-9 * max(1, abs(vals[i]))]
    assert near == []


def test_filter_operators():
    t = small()
    f = ProfileIs("MT") & ~QuantitySymbolIs("P") | ClassPrefix("Приборы")
    assert apply_filter(t, f) == [0, 1, 2, 3]
