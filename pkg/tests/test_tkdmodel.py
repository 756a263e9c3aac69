import pytest
from hypothesis import given, settings, strategies as st

from oracles import covered, inked_divisions
from tcgx.errors import ChunkTooSmall, FormatError, InvalidStyle, InvalidTkd, UnknownTarget, VersionError
from tcgx.export import Seg, Txt, primitives_text
from tcgx.tkdmodel import (
    LayoutSpec,
    RecordKind,
    Tkd,
    TkdRecord,
    continue_chunks,
    dumps_tkd,
    hsplit,
    layout,
    layout_spec_for,
    leaf,
    leaf_cells,
    load_tkd,
    loads_tkd,
    restyle,
    text_width,
    validate,
    vsplit,
)


def codes(tkd):
    return [v.code for v in validate(tkd)]


def two_col(rows=(("x", "y"),), **kw):
    t = Tkd.new(vsplit(leaf("a", "A"), leaf("b", "B"), **kw))
    t.records += [TkdRecord.data(r) for r in rows]
    return t


W2 = {"a": 20.0, "b": 30.0}


def test_leaf_order_examples():
    a, b, c = leaf("a"), leaf("b"), leaf("c")
    assert leaf_cells(vsplit(a, b, c)) == [a, b, c]
    a, b, c = leaf("a"), leaf("b"), leaf("c")
    assert [n.key for n in leaf_cells(vsplit(a, hsplit(b, c)))] == ["a", "b", "c"]
    assert leaf_cells(a) == [a]


def test_validate_examples():
    t = Tkd.new(vsplit(leaf("a"), leaf("b"), leaf("c")))
    t.records += [TkdRecord.data([1, 2, 3]), TkdRecord.data([4, 5, 6])]
    assert validate(t) == []
    t.records.append(TkdRecord.data([1, 2]))
    assert codes(t) == ["ArityViolation"]
    d = Tkd.new(vsplit(leaf("mass"), leaf("mass")))
    assert "DuplicateKey" in codes(d)


def test_validate_other_violations():
    assert "UnknownUnit" in codes(Tkd.new(vsplit(leaf("a", unit="parsec"), leaf("b"))))
    assert "BadSplit" in codes(Tkd.new(vsplit(leaf("a"))))
    bad = vsplit(leaf("a"), leaf("b"))
    bad.arbitrary = True
    assert "BadSplit" in codes(Tkd.new(bad))
    assert validate(Tkd.new(hsplit(leaf("a"), arbitrary=True))) == []
    assert "LeafWithoutKey" in codes(Tkd.new(vsplit(leaf(None), leaf("b"))))
    t = two_col()
    t.records.append(TkdRecord(RecordKind.HEADER, ["A", "B"]))
    assert "MultipleHeaders" in codes(t)
    t = two_col()
    t.records.reverse()
    assert "HeaderNotFirst" in codes(t)
    t = two_col()
    t.records.insert(1, TkdRecord.group("g", 2, 2))
    assert "BadGroupSpan" in codes(t)
    t.records.append(TkdRecord.data(["p", "q"]))
    assert "BadGroupSpan" not in codes(t)
    t = two_col()
    t.style.default_font = 4.0
    t.style.col_line["a"] = "dotted"
    assert codes(t).count("InvalidStyle") == 2


def test_two_column_layout_counts():
    out = layout(two_col(), LayoutSpec(W2))
    segs = [p for p in out.primitives if isinstance(p, Seg)]
    texts = [p for p in out.primitives if isinstance(p, Txt)]
    # frame (4), the column divider, and the rule under the header
    assert len(segs) == 6
    assert sorted(t.text for t in texts) == ["A", "B", "x", "y"]
    assert (out.width, out.height) == (50.0, 23.0)
    assert Seg(20.0, 0.0, 20.0, 23.0) in segs and Seg(0.0, 15.0, 50.0, 15.0) in segs


def test_hidden_data_division():
    out = layout(two_col(data=False), LayoutSpec(W2))
    verticals = [s for s in out.primitives if isinstance(s, Seg) and s.x1 == s.x2 == 20.0]
    assert verticals == [Seg(20.0, 0.0, 20.0, 15.0)]


def test_hidden_header_division_shows_block_text(data_dir):
    t = load_tkd(data_dir / "tkd" / "statement_blank.tkd")
    t.records.append(TkdRecord.data(["1", "Д", "Н", "шт", 3.0, 2.0, ""]))
    out = layout(t, layout_spec_for(t))
    texts = {p.text for p in out.primitives if isinstance(p, Txt)}
    assert "Количество за месяц" in texts and "План" not in texts
    x = 15 + 60 + 12 + 20
    split = [s for s in out.primitives if isinstance(s, Seg) and s.x1 == s.x2 == x]
    assert split and all(s.y1 >= 15.0 for s in split)


def test_header_only():
    t = Tkd.new(vsplit(leaf("a", "A"), leaf("b", "B")))
    out = layout(t, LayoutSpec(W2))
    assert out.height == 15.0
    assert all(max(p.y1, p.y2) <= 15.0 for p in out.primitives if isinstance(p, Seg))
    assert sorted(p.text for p in out.primitives if isinstance(p, Txt)) == ["A", "B"]


def test_section_row_spans_width():
    t = two_col()
    t.records.insert(1, TkdRecord.section("Оборудование", 2))
    out = layout(t, LayoutSpec(W2))
    title = [p for p in out.primitives if isinstance(p, Txt) and p.text == "Оборудование"]
    assert len(title) == 1 and title[0].x == 25.0
    # the column divider skips the section band 15..23
    div = [s for s in out.primitives if isinstance(s, Seg) and s.x1 == s.x2 == 20.0]
    assert all(not (s.y1 < 19 < s.y2) for s in div)


def test_layout_deterministic_and_pure(data_dir):
    t = load_tkd(data_dir / "tkd" / "spec_sample.tkd")
    spec = layout_spec_for(t)
    before = dumps_tkd(t)
    a = primitives_text(layout(t, spec).primitives)
    b = primitives_text(layout(load_tkd(data_dir / "tkd" / "spec_sample.tkd"), spec).primitives)
    assert a == b and dumps_tkd(t) == before


def test_layout_rejects_invalid():
    t = two_col()
    t.records.append(TkdRecord.data(["x"]))
    with pytest.raises(InvalidTkd):
        layout(t, LayoutSpec(W2))
    with pytest.raises(InvalidTkd):
        layout(two_col(), LayoutSpec({"a": 10.0}))


# ----------------------------------------------------------- grid property

@st.composite
def trees(draw, depth=0, counter=None):
    counter = counter if counter is not None else [0]
    if depth >= 3 or draw(st.integers(0, 2)) == 0 and depth:
        counter[0] += 1
        return leaf(f"k{counter[0]}", f"h{counter[0]}")
    n = draw(st.integers(2, 3))
    kids = [draw(trees(depth + 1, counter)) for _ in range(n)]
    make = vsplit if draw(st.booleans()) else hsplit
    return make(*kids, header=draw(st.booleans()), data=draw(st.booleans()))


@settings(max_examples=150, deadline=None)
@given(trees(), st.data())
def test_grid_lines_match_cell_renderer(tree, data):
    keys = [lf.key for lf in leaf_cells(tree)]
    widths = {k: float(data.draw(st.integers(5, 40))) for k in keys}
    t = Tkd.new(tree)
    t.records.append(TkdRecord.data(["v"] * len(keys)))
    spec = LayoutSpec(widths, row_height=8.0, header_height=15.0)
    out = layout(t, spec)
    segs = [p for p in out.primitives if isinstance(p, Seg)]
    w = out.width
    row_h = out.height - 15.0
    probes = {("header", k): v for k, v in inked_divisions(tree, widths, 0, 0, w, 15.0, "header").items()}
    probes.update({("data", k): v for k, v in inked_divisions(tree, widths, 0, 15.0, w, row_h, "data").items()})
    for (_, (orient, c, t_)), inked in probes.items():
        assert covered(segs, orient, c, t_) == inked


# ------------------------------------------------------------- continuation

def rows_tkd(n):
    return two_col([(f"r{i}", str(i)) for i in range(n)])


def data_order(chunks):
    return [i for c in chunks for i in c.records]


def test_chunks_four_four_two():
    t = rows_tkd(10)
    cs = continue_chunks(t, LayoutSpec(W2, chunk_height=15 + 4 * 8))
    assert [len(c.records) for c in cs] == [4, 4, 2]
    assert [c.origin for c in cs] == [(0.0, 0.0), (60.0, 0.0), (120.0, 0.0)]
    left = continue_chunks(t, LayoutSpec(W2, chunk_height=47, continuation="left"))
    assert [c.origin[0] for c in left] == [0.0, -60.0, -120.0]


def test_single_chunk_when_all_fit():
    cs = continue_chunks(rows_tkd(3), LayoutSpec(W2, chunk_height=500))
    assert len(cs) == 1 and cs[0].records == [1, 2, 3]


def test_numbers_row_repeat():
    t = rows_tkd(10)
    cs = continue_chunks(t, LayoutSpec(W2, chunk_height=15 + 8 + 4 * 8, repeat="numbers"))
    assert [c.prefix for c in cs] == ["header", "numbers", "numbers"]
    # later chunks hold one more row since only the number row repeats
    assert [len(c.records) for c in cs] == [4, 5, 1]
    for c in cs[1:]:
        texts = [p.text for p in c.primitives if isinstance(p, Txt)]
        assert texts[:2] == ["1", "2"] and "A" not in texts
    first = [p.text for p in cs[0].primitives if isinstance(p, Txt)]
    assert first[:4] == ["A", "B", "1", "2"]


def test_chunk_too_small():
    with pytest.raises(ChunkTooSmall):
        LayoutSpec(W2, chunk_height=20)
    tall = Tkd.new(hsplit(leaf("a", "A"), arbitrary=True))
    tall.records.append(TkdRecord.data(["1\n2\n3"]))
    with pytest.raises(ChunkTooSmall):
        continue_chunks(tall, LayoutSpec({"a": 20.0}, chunk_height=30))


@settings(max_examples=200)
@given(st.integers(0, 60), st.integers(1, 12), st.sampled_from(["header", "numbers"]),
       st.sampled_from(["left", "right"]), st.integers(0, 8))
def test_chunks_conserve_rows(n, cap, repeat, direction, sections):
    t = rows_tkd(n)
    for s in range(min(sections, n)):
        t.records.insert(1 + s * 2, TkdRecord.section(f"S{s}", 2))
    extra = 8 if repeat == "numbers" else 0
    spec = LayoutSpec(W2, chunk_height=15 + extra + cap * 8, repeat=repeat, continuation=direction)
    cs = continue_chunks(t, spec)
    assert data_order(cs) == list(range(1, len(t.records)))
    assert all(c.height <= spec.chunk_height + 1e-9 for c in cs)
    assert all(c.records for c in cs[1:])


# ------------------------------------------------------------------ styling

def test_restyle_column_and_cell():
    t = Tkd.new(vsplit(leaf("name", "N"), leaf("mass", "M")))
    t.records += [TkdRecord.data(["a", 1.0]), TkdRecord.data(["b", 2.0])]
    restyle(t, "mass", font=2.5)
    spec = LayoutSpec({"name": 30.0, "mass": 20.0})
    out = layout(t, spec)
    mass = [p for p in out.primitives if isinstance(p, Txt) and p.text in ("1", "2")]
    assert [p.height for p in mass] == [2.5, 2.5]
    restyle(t, "mass", row=2, font=5.0)
    out = layout(t, spec)
    h = {p.text: p.height for p in out.primitives if isinstance(p, Txt)}
    assert (h["1"], h["2"], h["a"]) == (2.5, 5.0, 3.5)
    assert primitives_text(out.primitives) == primitives_text(layout(t, spec).primitives)


def test_restyle_line_type_and_errors():
    t = two_col()
    t.records.append(TkdRecord.data(["p", "q"]))
    restyle(t, "b", row=1, line_type="dashed")
    out = layout(t, LayoutSpec(W2))
    dashed = [s for s in out.primitives if isinstance(s, Seg) and s.line_type == "dashed"]
    assert dashed == [Seg(20.0, 23.0, 50.0, 23.0, "dashed")]
    with pytest.raises(UnknownTarget):
        restyle(t, "zz", font=2.5)
    with pytest.raises(UnknownTarget):
        restyle(t, "a", row=9, font=2.5)
    with pytest.raises(InvalidStyle):
        restyle(t, "a", font=3.0)
    with pytest.raises(InvalidStyle):
        restyle(t, "a", line_type="dotted")


@given(st.lists(st.text("abcдлинный", max_size=20), min_size=2, max_size=2))
def test_text_inside_cell_or_warned(vals):
    out = layout(two_col([tuple(vals)]), LayoutSpec(W2))
    warned = {w.key for w in out.warnings}
    for key, v, w in zip("ab", vals, (20.0, 30.0)):
        assert (text_width(v, 3.5) > w - 2.0) == (key in warned)


# ------------------------------------------------------------ serialization

@pytest.mark.parametrize("name", ["spec_blank.tkd", "spec_sample.tkd", "statement_blank.tkd"])
def test_shipped_round_trip(data_dir, name):
    text = (data_dir / "tkd" / name).read_text(encoding="utf-8")
    assert dumps_tkd(loads_tkd(text)) == text


def test_round_trip_with_styles_and_groups():
    t = rows_tkd(3)
    t.records.insert(1, TkdRecord.section("Раздел \"1\"", 2))
    t.records.insert(2, TkdRecord.group("Труба", 2, 2))
    t.records.append(TkdRecord.data([None, 2.5]))
    t.widths = {"a": 12.5}
    restyle(t, "a", font=5.0, line_type="thin")
    restyle(t, "b", row=3, font=2.5, line_type="dashed")
    text = dumps_tkd(t)
    back = loads_tkd(text)
    assert dumps_tkd(back) == text and back.style == t.style and back.widths == t.widths
    assert validate(back) == []


@pytest.mark.parametrize("text,err", [
    ("", FormatError),
    ("TKD 2\nTREE\n  L - hd {}\nEND\n", VersionError),
    ("TKD x\n", FormatError),
    ("TKD 1\nRECORDS\nEND\n", FormatError),
    ("TKD 1\nTREE\n  L hd {}\nEND\n", FormatError),
    ("TKD 1\nTREE\n  L - hd {\"key\": \"a\"}\nRECORDS\nQ []\nEND\n", FormatError),
    ("TKD 1\nTREE\n  L - hd {\"key\": \"a\"}\nSTYLE\nfont row 1\nEND\n", FormatError),
    ("TKD 1\nTREE\n  L - hd {\"key\": \"a\"}\n  L - hd {\"key\": \"b\"}\nEND\n", FormatError),
])
def test_malformed(text, err):
    with pytest.raises(err):
        loads_tkd(text)
