import xml.etree.ElementTree as ET

from tcgx.export import Seg, Txt, export_csv, export_svg, fmt, primitives_text
from tcgx.tkdmodel import Tkd, TkdRecord, layout, layout_spec_for, leaf, load_tkd, vsplit

NS = "{http://www.w3.org/2000/svg}"


def test_empty_svg():
    doc = export_svg([])
    root = ET.fromstring(doc)
    assert root.tag == NS + "svg" and list(root) == []


def test_one_segment():
    root = ET.fromstring(export_svg([Seg(0.0, 0.0, 10.0, 0.0)]))
    (line,) = list(root)
    assert line.tag == NS + "line"
    assert [line.get(k) for k in ("x1", "y1", "x2", "y2")] == ["0", "0", "10", "0"]
    assert root.get("width") == "10mm"


def test_text_is_escaped_and_dashes_kept():
    doc = export_svg([Txt(1, 2, 3.5, "a<b & \"c\""), Seg(0, 0, 1, 1, "dashed")])
    root = ET.fromstring(doc)
    assert root[0].text == 'a<b & "c"' and root[1].get("stroke-dasharray") == "3 1.5"


def test_number_format():
    assert [fmt(v) for v in (0.0, -0.0, 1 / 3, 123456789.0, 1e-7, 2.5)] == \
        ["0", "0", "0.333333", "123456789", "0", "2.5"]


def test_golden_sample_svg(data_dir, golden_dir):
    t = load_tkd(data_dir / "tkd" / "spec_sample.tkd")
    doc = export_svg(layout(t, layout_spec_for(t)).primitives)
    assert doc == (golden_dir / "spec_sample.svg").read_text(encoding="utf-8")


def test_csv():
    t = Tkd.new(vsplit(leaf("name"), leaf("qty")))
    t.records += [TkdRecord.section("Трубы", 2), TkdRecord.data(["a,b", 2.0]), TkdRecord.data(["c", None])]
    assert export_csv(t) == 'name,qty\nТрубы,\n"a,b",2\nc,\n'


def test_primitives_text_stable():
    prims = [Seg(0, 0, 1, 0), Txt(0.5, 1, 2.5, "x", "middle")]
    assert primitives_text(prims) == "SEG solid 0 0 1 0\nTXT middle 0.5 1 2.5 x\n"
    assert primitives_text([]) == ""
