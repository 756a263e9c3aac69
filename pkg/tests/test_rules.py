import pytest
from hypothesis import given, strategies as st

from tcgx.enkat.catalog import eval_ruleset, load_catalog
from tcgx.enkat.rules import (
    Const,
    ExtMenu,
    Field,
    Menu,
    NumInput,
    ScriptedInput,
    StrInput,
    VarRead,
    bind_ruleset,
    parse_rule,
    parse_ruleset,
)
from tcgx.enkat.table import Column, ColumnKind, DataTable, resolve_embedded
from tcgx.errors import (
    ChoiceNotInMenu,
    InputExhausted,
    MissingChoice,
    RuleSyntaxError,
    UnknownColumn,
    UnknownMenu,
    UnknownVariable,
    UnresolvedEmbeddedMenu,
)

MENUS = {
    "Исполнение": ("обычное", "северное"),
    "Испытание": ("гидравлическое", "пневматическое"),
}


def table():
    cols = [
        Column("name", ColumnKind.TEXT),
        Column("dn", ColumnKind.NUMBER, "mm"),
        Column("s", ColumnKind.NUMBER, "mm"),
        Column("material", ColumnKind.MENU),
        Column("empty", ColumnKind.TEXT),
    ]
    rows = [
        ["Насос", 57.0, 3.5, Menu(("Ст20", "09Г2С")), ""],
        ["Труба", 76.0, 4.0, Menu(("Ст3",)), ""],
    ]
    return DataTable("T", cols, rows)


# (rules, row, answers, choices, expected column texts); expectations are
# hand evaluations of the concatenation semantics
GOLDEN = [
    (['name := "Труба " [dn] "×" {num:Стенка:mm}=>$w', 'designation := "ГОСТ-" $w'],
     0, ["3.5"], {"material": "Ст20"}, {"name": "Труба 57×3.5", "designation": "ГОСТ-3.5"}),
    (['x := "Константа"'], 1, [], {"material": "Ст3"}, {"x": "Константа"}),
    (["x :="], 0, [], {"material": "Ст20"}, {"x": ""}),
    (["x := [dn]"], 0, [], {"material": "Ст20"}, {"x": "57"}),
    (["x := [s]"], 0, [], {"material": "Ст20"}, {"x": "3.5"}),
    (["x := [material]"], 0, [], {"material": "09Г2С"}, {"x": "09Г2С"}),
    (['x := "исп. " {menu:Исполнение}'], 0, ["северное"], {"material": "Ст20"}, {"x": "исп. северное"}),
    (["x := {num:Стенка:mm}"], 0, ["0.35 cm"], {"material": "Ст20"}, {"x": "3.5"}),
    (["x := {num:Стенка:mm}"], 0, ["3,5"], {"material": "Ст20"}, {"x": "3.5"}),
    (["x := {num:Число}"], 0, ["12"], {"material": "Ст20"}, {"x": "12"}),
    (["x := {str:Примечание}"], 0, ["по месту"], {"material": "Ст20"}, {"x": "по месту"}),
    (["a := [dn]", 'b := "Ду" $a'], 0, [], {"material": "Ст20"}, {"a": "57", "b": "Ду57"}),
    (['a := "X"=>$k "-"', "b := $k $k"], 0, [], {"material": "Ст20"}, {"a": "X-", "b": "XX"}),
    (["name := [name]=>$n", 'designation := $n "/" [dn]'], 1, [], {"material": "Ст3"},
     {"name": "Труба", "designation": "Труба/76"}),
    (['x := "кавычка \\" и \\\\"'], 0, [], {"material": "Ст20"}, {"x": 'кавычка " и \\'}),
    (['note := "Ру " {num:Давление:MPa} " МПа"'], 0, ["16 kgf/cm2"], {"material": "Ст20"},
     {"note": "Ру 1.569064 МПа"}),
    (["x := {num:Давление:kgf/cm2}"], 0, ["1.6 MPa"], {"material": "Ст20"}, {"x": "16.3154594076"}),
    (["x := {num:T:K}"], 0, ["20 °C"], {"material": "Ст20"}, {"x": "293.15"}),
    (['x := "[" [empty] "]"'], 0, [], {"material": "Ст20"}, {"x": "[]"}),
    (['a := [dn]=>$d "x" [s]=>$t', 'b := $t "/" $d', 'c := $a "|" $b'], 0, [], {"material": "Ст20"},
     {"a": "57x3.5", "b": "3.5/57", "c": "57x3.5|3.5/57"}),
    (["m := {menu:Испытание}=>$i", 'n := "Испытание: " $i'], 0, ["пневматическое"], {"material": "Ст20"},
     {"m": "пневматическое", "n": "Испытание: пневматическое"}),
    (['name := [name] " " [material]=>$st', 'designation := "ст. " $st " " {menu:Исполнение} " " {str:Код}'],
     1, ["обычное", "К-7"], {"material": "Ст3"}, {"name": "Труба Ст3", "designation": "ст. Ст3 обычное К-7"}),
]


def run_case(lines, row, answers, choices):
    rs = parse_ruleset(lines)
    t = table()
    bind_ruleset(rs, t.keys, MENUS)
    return eval_ruleset(t, row, rs, ScriptedInput(answers), MENUS, choices)


@pytest.mark.parametrize("case", GOLDEN, ids=[f"case{i}" for i in range(len(GOLDEN))])
def test_golden(case):
    lines, row, answers, choices, expected = case
    out, variables = run_case(lines, row, answers, choices)
    assert out == expected
    for col, text in expected.items():
        assert variables[col] == text
    again, _ = run_case(lines, row, answers, choices)
    assert again == out


def test_golden_suite_size():
    assert len(GOLDEN) >= 20


def test_shipped_bundle_pick(data_dir):
    cat = load_catalog(data_dir / "catalogs" / "pipes_gost")
    assert len(cat.menus) == 2 and len(cat.rules) == 5
    out, _ = cat.pick(0, ScriptedInput(["обычное", "1.6", "гидравлическое"]), {"material": "Ст20"})
    assert out == {
        "name": "Труба 57×3 Ст20",
        "designation": "ГОСТ 10704-91/ГОСТ 10705-80 Ст20 обычное",
        "note": "Ру 1.6 МПа, испытание гидравлическое",
        "mark": "Т-57",
        "unit_mass": "4",
    }


def test_parse_fragments():
    r = parse_rule('"Труба " [dn] "×" {num:Стенка:mm}=>$w')
    assert r.fragments == (Const("Труба "), Field("dn"), Const("×"), NumInput("Стенка", "mm", "w"))
    assert parse_rule("").fragments == ()
    r = parse_rule("{menu:M} {str:P}=>$p $p")
    assert r.fragments == (ExtMenu("M"), StrInput("P", "p"), VarRead("p"))


@pytest.mark.parametrize("text,pos", [("[dn", 0), ('"open', 0), ("{foo:x}", 0), ("$", 1), ("[a]x", 3),
                                      ("[a] => x", 7), ("{num:P:}", 0), ("$a=>$a", 0), ('"\\q"', 1)])
def test_syntax_errors(text, pos):
    with pytest.raises(RuleSyntaxError) as ei:
        parse_rule(text)
    assert ei.value.pos == pos


@given(st.lists(st.sampled_from([
    '"a"', '"б"', "[dn]", "[name]", "{str:P}", "{num:N:mm}", '""',
]), max_size=6))
def test_to_text_round_trip(frags):
    r = parse_rule(" ".join(frags))
    assert parse_rule(r.to_text()) == r


def test_binding_errors():
    t = table()
    with pytest.raises(UnknownColumn):
        bind_ruleset(parse_ruleset(["x := [nope]"]), t.keys, MENUS)
    with pytest.raises(UnknownMenu):
        bind_ruleset(parse_ruleset(["x := {menu:Нет}"]), t.keys, MENUS)
    with pytest.raises(UnknownVariable):
        bind_ruleset(parse_ruleset(["x := $later", "later := [dn]"]), t.keys, MENUS)


def test_eval_errors():
    t = table()
    with pytest.raises(InputExhausted):
        eval_ruleset(t, 0, parse_ruleset(["x := {str:P}"]), ScriptedInput([]), MENUS, {"material": "Ст20"})
    with pytest.raises(UnknownVariable):
        eval_ruleset(t, 0, parse_ruleset(["x := $never"]), ScriptedInput([]), MENUS, {"material": "Ст20"})
    with pytest.raises(UnresolvedEmbeddedMenu):
        eval_ruleset(t, 0, parse_ruleset(["x := [material]"]), ScriptedInput([]), MENUS)
    with pytest.raises(ChoiceNotInMenu):
        eval_ruleset(t, 0, parse_ruleset(["x := {menu:Испытание}"]), ScriptedInput(["нет"]), MENUS,
                     {"material": "Ст20"})
    with pytest.raises(IndexError):
        eval_ruleset(t, 9, parse_ruleset(["x := [dn]"]), ScriptedInput([]), MENUS)


def test_resolve_embedded():
    t = table()
    assert resolve_embedded(t, 0, {"material": "09Г2С"})["material"] == "09Г2С"
    with pytest.raises(ChoiceNotInMenu):
        resolve_embedded(t, 0, {"material": "Ст3"})
    with pytest.raises(MissingChoice):
        resolve_embedded(t, 0, {})
    plain = DataTable("P", [Column("a"), Column("n", ColumnKind.NUMBER, "mm")], [["x", 1.0]])
    assert resolve_embedded(plain, 0, {}) == {"a": "x", "n": 1.0}


names = st.sampled_from(["a", "b", "c", "d"])


@given(st.lists(st.tuples(names, st.booleans(), st.sampled_from(["[dn]", "[name]", '"k"'])), min_size=1,
                max_size=6), st.integers(0, 1))
def test_variable_discipline(steps, row):
    """Rules that only read variables saved by earlier rules never fail."""
    saved, lines = [], []
    for n, (var, read, frag) in enumerate(steps):
        parts = [frag + f"=>${var}{n}"]
        if read and saved:
            parts.append("$" + saved[-1])
        lines.append(f"col{n} := " + " ".join(parts))
        saved.append(f"{var}{n}")
    out, variables = run_case(lines, row, [], {"material": "Ст20" if row == 0 else "Ст3"})
    assert set(out) == {f"col{n}" for n in range(len(steps))}
