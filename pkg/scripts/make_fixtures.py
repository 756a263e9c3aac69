"""Regenerate the shipped sample files under src/tcgx/data and the golden SVG.

Run from the repository root:  python3 scripts/make_fixtures.py
"""
from pathlib import Path

import numpy as np

from tcgx.drawfile import save_drawing
from tcgx.export import export_svg
from tcgx.geomcore import Drawing, DrawingScale, Segment, Space, Text, add_element
from tcgx.parmod import INSTRUMENT_TYPE, TRACE_TYPE, add_object, as_element, new_instance, regenerate, save_prototype
from tcgx.rasterlay import MonoRaster, rasterize_segment, write_pbm
from tcgx.specgen import fill, merge_identical, pack_sections, sort_rows
from tcgx.records import SpecRecord
from tcgx.tkdmodel import Tkd, hsplit, layout, layout_spec_for, leaf, restyle, save_tkd, vsplit

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "tcgx" / "data"


def spec_blank() -> Tkd:
    tree = vsplit(
        leaf("pos", "Поз."),
        leaf("name", "Наименование"),
        leaf("designation", "Обозначение"),
        leaf("dn", "Ду, мм", "mm"),
        leaf("p", "Ру, МПа", "MPa"),
        leaf("unit", "Ед."),
        leaf("qty", "Кол."),
        leaf("mass", "Масса, кг", "kg"),
        leaf("section", "Раздел"),
        leaf("note", "Примечание"),
    )
    t = Tkd.new(tree, "Спецификация оборудования, изделий и материалов")
    t.widths = {"pos": 15.0, "name": 75.0, "designation": 55.0, "dn": 15.0, "p": 15.0, "unit": 10.0,
                "qty": 15.0, "mass": 20.0, "section": 20.0, "note": 25.0}
    return t


def statement_blank() -> Tkd:
    tree = vsplit(
        leaf("pos", "Поз."),
        hsplit(leaf("designation", "Обозначение"), leaf("name", "Наименование")),
        leaf("unit", "Ед."),
        vsplit(leaf("plan", "План"), leaf("fact", "Факт"), header=False, text="Количество за месяц"),
        leaf("note", "Примечание"),
    )
    t = Tkd.new(tree, "Ведомость месячная")
    t.widths = {"pos": 15.0, "designation": 60.0, "name": 60.0, "unit": 12.0, "plan": 20.0, "fact": 20.0,
                "note": 30.0}
    return t


SAMPLE_RECORDS = [
    SpecRecord({"name": "Труба 57×3.5", "designation": "ГОСТ 10704-91", "dn": (57.0, "mm"),
                "p": (16.0, "kgf/cm2"), "unit": "м", "mass": (4.62, "kg"), "section": "Трубы"}, 12.5),
    SpecRecord({"name": "Задвижка 30с41нж", "designation": "Ду50 Ру16", "dn": (50.0, "mm"),
                "p": (1.6, "MPa"), "unit": "шт", "mass": (18.0, "kg"), "section": "Арматура"}, 2),
    SpecRecord({"name": "Труба 76×4", "designation": "ГОСТ 10704-91", "dn": (76.0, "mm"),
                "p": (16.0, "kgf/cm2"), "unit": "м", "mass": (7.1, "kg"), "section": "Трубы"}, 4.25),
    SpecRecord({"name": "Труба 57×3.5", "designation": "ГОСТ 10704-91", "dn": (57.0, "mm"),
                "p": (16.0, "kgf/cm2"), "unit": "м", "mass": (4.62, "kg"), "section": "Трубы"}, 3.5),
    SpecRecord({"name": "Манометр МП-100", "designation": "0-10 кгс/см2", "p": (10.0, "kgf/cm2"),
                "unit": "шт", "mass": (0.6, "kg"), "section": "Приборы"}, 3),
]


def spec_sample() -> Tkd:
    t = fill(spec_blank(), SAMPLE_RECORDS)
    t = merge_identical(sort_rows(pack_sections(t, "section"), ["name", "dn"]), "qty")
    restyle(t, "note", line_type="thin")
    return t


def sample_drawing() -> Drawing:
    d = Drawing(DrawingScale.parse("1:100"), {"title": "План трубопроводов", "sheet": "1"}, [])
    tr = new_instance(TRACE_TYPE, "T1", dn=57.0, name="Труба 57×3.5", designation="ГОСТ 10704-91")
    for p in [(0.0, 0.0), (12000.0, 0.0), (12000.0, 6000.0)]:
        add_object(tr, "nodes", p=p)
    add_object(tr, "labels", text="Т1", node=1, dx=200.0, dy=300.0)
    regenerate(tr, d.scale)
    pi = new_instance(INSTRUMENT_TYPE, "P1", pressure=10.0)
    add_object(pi, "places", p=(6000.0, 1500.0), pos="PI-1")
    add_object(pi, "places", p=(12000.0, 7500.0), pos="PI-2")
    regenerate(pi, d.scale)
    add_element(d, Segment((-1000.0, -2000.0), (14000.0, -2000.0), Space.NATURAL, "dash-dot-thin"))
    add_element(d, as_element(tr))
    add_element(d, as_element(pi))
    add_element(d, Text((0.0, 100.0), "План на отм. 0.000", 5.0, 0, False, Space.PAPER))
    return d


def sample_raster() -> MonoRaster:
    pix = np.zeros((200, 300), dtype=bool)
    pix = rasterize_segment(pix, (0.0, 0.0), 150, (2.0, -2.0), (48.0, -30.0), 2.0)
    return MonoRaster.from_pixels(pix, 150, (0.0, 0.0))


def main():
    (DATA / "tkd").mkdir(parents=True, exist_ok=True)
    (DATA / "drawings").mkdir(parents=True, exist_ok=True)
    (DATA / "prototypes").mkdir(parents=True, exist_ok=True)
    (DATA / "raster").mkdir(parents=True, exist_ok=True)
    save_tkd(spec_blank(), DATA / "tkd" / "spec_blank.tkd")
    save_tkd(statement_blank(), DATA / "tkd" / "statement_blank.tkd")
    sample = spec_sample()
    save_tkd(sample, DATA / "tkd" / "spec_sample.tkd")
    d = sample_drawing()
    save_drawing(d, DATA / "drawings" / "sample.dwt")
    save_prototype(DATA / "prototypes", "trace", d.elements[1].module)
    write_pbm(sample_raster(), DATA / "raster" / "line.pbm")
    golden = ROOT / "tests" / "golden" / "spec_sample.svg"
    golden.parent.mkdir(parents=True, exist_ok=True)
    golden.write_text(export_svg(layout(sample, layout_spec_for(sample)).primitives), encoding="utf-8")


if __name__ == "__main__":
    main()
