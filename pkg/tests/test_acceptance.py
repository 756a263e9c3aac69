"""Acceptance criteria 1-10.  Each test carries ``acceptance(n, title)``;
the terminal summary prints one PASS/FAIL line per criterion."""
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

import fuzz
from oracles import (
    REFERENCE_MPA,
    cascade_closure,
    clip_pixels,
    hausdorff_segments,
    oracle_factor,
    oracle_merge,
    oracle_pack,
    oracle_sort,
    sig_equal,
)
from test_rules import GOLDEN, run_case
from test_specgen import KEYS, NAMES, QTYS, make, plain
from test_units import PAIRS, round_trip_ulps
from tcgx.bench import BATTERY, BenchSpec, bench_catalog, corpus_hash, make_corpus, oracle_check
from tcgx.drawfile import dumps_drawing, load_drawing, save_drawing
from tcgx.enkat.catalog import bundle_bytes, load_catalog, save_catalog
from tcgx.enkat.filters import parse_filter
from tcgx.enkat.units import convert
from tcgx.errors import TooSmall
from tcgx.export import export_svg
from tcgx.geomcore import STANDARD_SCALES, Drawing, DrawingScale, Segment, add_element, quantize, stored_ulp, work_ulp
from tcgx.parmod import dumps_proto, load_prototype, loads_proto, remove_object, save_prototype
from tcgx.rasterlay import MonoRaster, fit_segment, rasterize_segment, render_tiles, render_window
from tcgx.specgen import exact_sum, factor_common_names, merge_identical, pack_sections, sort_rows
from tcgx.tkdmodel import LayoutSpec, Tkd, TkdRecord, continue_chunks, dumps_tkd, layout, layout_spec_for, leaf
from tcgx.tkdmodel import load_tkd, loads_tkd, save_tkd, vsplit

CORPUS_SHA = "474bf7988f4e1eb464103fce0380f7e37a4041a2c1c12d6e02d0f0eae3392a01"
acceptance = pytest.mark.acceptance


def fresh_interpreter(code):
    """Run ``code`` in a new process with a different hash seed."""
    env = dict(os.environ, PYTHONHASHSEED="12345")
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, env=env, check=True)
    return r.stdout


# ---------------------------------------------------------------- 1

@acceptance(1, "precision model")
def test_precision_model():
    t0 = time.perf_counter()
    assert quantize(15000.0) != quantize(15000.001)
    assert quantize(15000.001) - quantize(15000.0) == stored_ulp(15000.0)
    assert stored_ulp(15000.0) / work_ulp(15000.0) == 2**29
    assert Fraction(stored_ulp(1.0)) / Fraction(work_ulp(1.0)) == 2**29
    assert time.perf_counter() - t0 < 1.0


# ---------------------------------------------------------------- 2

@acceptance(2, "minimum-size rule sweep")
def test_minimum_size_sweep():
    rng = random.Random(2)
    scales = [DrawingScale(r) for r in STANDARD_SCALES]
    accepted = rejected = 0
    t0 = time.perf_counter()
    for _ in range(10_000):
        s = rng.choice(scales)
        # lengths cluster around the threshold for the chosen scale
        length = float(s.ratio) * 0.3 * rng.uniform(0.5, 1.5)
        d = Drawing(s)
        seg = Segment((0.0, 0.0), (length, 0.0))
        footprint = Fraction(quantize(length)) / s.ratio
        try:
            add_element(d, seg)
        except TooSmall:
            rejected += 1
            assert footprint < Fraction(3, 10)
        else:
            accepted += 1
            assert footprint >= Fraction(3, 10)
    elapsed = time.perf_counter() - t0
    assert accepted and rejected
    assert elapsed < 1.0, elapsed


# ---------------------------------------------------------------- 3

@pytest.fixture(scope="module")
def bench_report():
    return bench_catalog(BenchSpec(), BATTERY, oracle_fraction=0.01)


@acceptance(3, "catalog scale benchmark")
def test_bench_corpus_shape(bench_report):
    assert (bench_report.n_tables, bench_report.n_rows) == (265, 68213)
    assert bench_report.corpus_hash == CORPUS_SHA


@acceptance(3, "catalog scale benchmark")
def test_bench_battery_matches_oracle(bench_report):
    assert bench_report.oracle_rows > 0
    assert bench_report.mismatches == 0


@acceptance(3, "catalog scale benchmark")
def test_bench_battery_within_budget(bench_report):
    assert bench_report.battery_seconds < 1.0, bench_report.text()


@acceptance(3, "catalog scale benchmark")
def test_bench_sub_corpus_full_oracle():
    tables = make_corpus(BenchSpec(30, 5000, 3))
    rows, bad = oracle_check(tables, [parse_filter(e) for e in BATTERY], fraction=1.0)
    assert rows == 5000 and bad == 0


# ---------------------------------------------------------------- 4

@acceptance(4, "rule DSL golden suite")
def test_rule_golden_suite():
    assert len(GOLDEN) >= 20
    assert any("=>$" in line for case in GOLDEN for line in case[0])
    assert any("{menu:" in line for case in GOLDEN for line in case[0])
    assert any(isinstance(case[3].get("material"), str) for case in GOLDEN)
    for lines, row, answers, choices, expected in GOLDEN:
        first, _ = run_case(lines, row, answers, choices)
        second, _ = run_case(lines, row, answers, choices)
        assert first == expected
        assert repr(first).encode("utf-8") == repr(second).encode("utf-8")


@acceptance(4, "rule DSL golden suite")
def test_rule_golden_suite_fresh_process():
    code = (
        "import sys; sys.path.insert(0, %r)\n"
        "from test_rules import GOLDEN, run_case\n"
        "for c in GOLDEN:\n"
        "    print(repr(sorted(run_case(*c[:4])[0].items())))\n"
    ) % os.path.dirname(__file__)
    here = "".join(repr(sorted(run_case(*c[:4])[0].items())) + "\n" for c in GOLDEN)
    assert fresh_interpreter(code).decode("utf-8").replace("\r\n", "\n") == here


# ---------------------------------------------------------------- 5

@acceptance(5, "unit conversions")
def test_pressure_reference_table():
    assert {u for u, _ in REFERENCE_MPA} >= {"kgf/cm2", "mH2O"}
    for (unit, value), expected in REFERENCE_MPA.items():
        assert sig_equal(convert(value, unit, "MPa"), expected, 9), (unit, value)


@acceptance(5, "unit conversions")
def test_round_trips_all_pairs():
    rng = random.Random(5)
    worst = 0.0
    for a, b in PAIRS:
        for _ in range(500):
            v = rng.choice([1.0, -1.0]) * 10 ** rng.uniform(-6, 6)
            worst = max(worst, round_trip_ulps(v, a, b))
        for v in (0.0, 1.0, 100.0, -273.15, 1e-3):
            worst = max(worst, round_trip_ulps(v, a, b))
    assert worst <= 4


# ---------------------------------------------------------------- 6

def sample_svg(data_dir):
    t = load_tkd(data_dir / "tkd" / "spec_sample.tkd")
    return export_svg(layout(t, layout_spec_for(t)).primitives)


@acceptance(6, "TKD layout and continuation")
def test_sample_svg_byte_identical(data_dir, golden_dir):
    first = sample_svg(data_dir).encode("utf-8")
    assert first == sample_svg(data_dir).encode("utf-8")
    assert first == (golden_dir / "spec_sample.svg").read_bytes()
    code = (
        "from tcgx.export import export_svg\n"
        "from tcgx.tkdmodel import layout, layout_spec_for, load_tkd\n"
        "import sys\n"
        "t = load_tkd(%r)\n"
        "sys.stdout.buffer.write(export_svg(layout(t, layout_spec_for(t)).primitives).encode('utf-8'))\n"
    ) % str(data_dir / "tkd" / "spec_sample.tkd")
    assert fresh_interpreter(code) == first


@acceptance(6, "TKD layout and continuation")
def test_chunks_conserve_rows_1000_cases():
    rng = random.Random(6)
    widths = {"a": 20.0, "b": 30.0}
    for _ in range(1000):
        n = rng.randrange(0, 80)
        t = Tkd.new(vsplit(leaf("a", "A"), leaf("b", "B")))
        t.records += [TkdRecord.data([f"r{i}", str(i)]) for i in range(n)]
        for s in range(min(rng.randrange(0, 9), n)):
            t.records.insert(1 + 2 * s, TkdRecord.section(f"S{s}", 2))
        repeat = rng.choice(["header", "numbers"])
        cap = rng.randrange(1, 13)
        spec = LayoutSpec(widths, chunk_height=15 + (8 if repeat == "numbers" else 0) + cap * 8,
                          repeat=repeat, continuation=rng.choice(["left", "right"]))
        chunks = continue_chunks(t, spec)
        assert [i for c in chunks for i in c.records] == list(range(1, len(t.records)))
        assert all(c.records for c in chunks[1:])
        assert all(c.height <= spec.chunk_height + 1e-9 for c in chunks)


# ---------------------------------------------------------------- 7

SECTIONS = [None, "Трубы", "Арматура", "Приборы"]


def random_body(rng, groups=True, max_rows=50):
    out, n = [], 0
    while n < max_rows and rng.random() < 0.85:
        kind = rng.choice(["S", "G", "D"] if groups else ["S", "D"])
        seg = []
        for _ in range(rng.randrange(0, 9)):
            if n >= max_rows:
                break
            seg.append(("D", [rng.choice(NAMES), rng.choice([None, 15.0, 57.0, 76.0, "57"]),
                              rng.choice(QTYS), rng.choice(SECTIONS)]))
            n += 1
        if kind == "S":
            out.append(("S", rng.choice(["Трубы", "Арматура", ""])))
        elif kind == "G" and seg:
            out.append(("G", "Общее", len(seg)))
        out += seg
    return out


def quantity_total(t):
    return exact_sum([r.values[2] for r in t.data_rows() if r.values[2] is not None])


@acceptance(7, "specification pipeline")
def test_merge_conserves_quantity_1000_tables():
    rng = random.Random(70)
    for _ in range(1000):
        t = make(random_body(rng))
        assert quantity_total(merge_identical(t, "qty")) == quantity_total(t)


@acceptance(7, "specification pipeline")
def test_row_operations_match_oracles():
    rng = random.Random(71)
    for _ in range(500):
        body = random_body(rng)
        keys = rng.sample(KEYS, rng.randrange(1, 4))
        assert plain(sort_rows(make(body), keys)) == oracle_sort(body, [KEYS.index(k) for k in keys])
        assert plain(merge_identical(make(body), "qty")) == oracle_merge(body, 2)
        k = rng.randrange(1, 9)
        assert plain(factor_common_names(make(body), "name", k)) == oracle_factor(body, 0, k)
        flat = random_body(rng, groups=False)
        assert plain(pack_sections(make(flat), "section")) == oracle_pack(flat, 3)


# ---------------------------------------------------------------- 8

@acceptance(8, "referential integrity")
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_integrity_fuzz_10000_operations(seed):
    applied, rejected, cascades = fuzz.run(seed, 10_000)
    assert applied + rejected >= 9_000
    assert cascades > 100


@acceptance(8, "referential integrity")
def test_cascade_matches_reachability_on_dense_graph():
    m = fuzz.chain_type()
    from tcgx.parmod import add_object
    for _ in range(5):
        add_object(m, "pipes")
    for i in range(10):
        add_object(m, "texts", pipe=i % 5)
    for i in range(20):
        add_object(m, "notes", text=i % 10, prev=i - 1 if i else None)
    doomed = cascade_closure(fuzz.edges(m), ("pipes", 2))
    want = fuzz.expected_after_removal(m, doomed)
    assert remove_object(m, "pipes", 2, "cascade") == doomed
    assert m.lists == want and fuzz.dangling(m) == []


# ---------------------------------------------------------------- 9

@acceptance(9, "raster underlay")
def test_tiled_equals_monolithic_1000_windows():
    rng = np.random.default_rng(9)
    rasters = []
    for _ in range(20):
        w, h = int(rng.integers(1, 700)), int(rng.integers(1, 500))
        pix = rng.random((h, w)) < 0.003
        pix[:, : w // 3] = False
        rasters.append(MonoRaster.from_pixels(pix, int(rng.integers(75, 301)),
                                              (float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)))))
    for i in range(1000):
        r = rasters[i % len(rasters)]
        x0, y0, x1, y1 = r.rect()
        a, b = sorted(rng.uniform(x0 - 20, x1 + 20, 2))
        c, d = sorted(rng.uniform(y0 - 20, y1 + 20, 2))
        win = (a, c, b, d)
        o1, m1 = render_window(r, win)
        o2, m2 = render_tiles(r, win)
        assert o1 == o2 and m1.shape == m2.shape and (m1 == m2).all()
        o3, m3 = clip_pixels(r.pixels(), r.origin, r.pitch, win)
        if m3.size:
            assert o1 == o3 and (m1 == m3).all()
        else:
            assert m1.size == 0


@acceptance(9, "raster underlay")
def test_fit_recovers_synthetic_segments():
    rng = np.random.default_rng(90)
    checked = 0
    while checked < 1000:
        dpi = int(rng.choice([75, 150, 300]))
        stroke_px = (1.0, 1.5, 2.0)[checked % 3]
        corridor_px = float(rng.uniform(2.0, 4.0))
        p = 25.4 / dpi
        w, h = 300, 240
        a = (rng.uniform(10, w - 10) * p, -rng.uniform(10, h - 10) * p)
        b = (rng.uniform(10, w - 10) * p, -rng.uniform(10, h - 10) * p)
        if np.hypot(b[0] - a[0], b[1] - a[1]) < 10 * p:
            continue
        pix = np.zeros((h, w), bool)
        rasterize_segment(pix, (0.0, 0.0), dpi, a, b, stroke_px)
        r = MonoRaster.from_pixels(pix, dpi)
        jitter = rng.uniform(-0.4, 0.4, 4) * p
        fit = fit_segment(r, (a[0] + jitter[0], a[1] + jitter[1], b[0] + jitter[2], b[1] + jitter[3]),
                          corridor_px * p)
        assert hausdorff_segments((fit.p1, fit.p2), (a, b)) <= p
        checked += 1


# ---------------------------------------------------------------- 10

@acceptance(10, "serialization round trips")
def test_drawing_round_trip(data_dir, tmp_path):
    src = data_dir / "drawings" / "sample.dwt"
    save_drawing(load_drawing(src), tmp_path / "a.dwt")
    assert (tmp_path / "a.dwt").read_bytes() == src.read_bytes()
    save_drawing(load_drawing(tmp_path / "a.dwt"), tmp_path / "b.dwt")
    assert (tmp_path / "b.dwt").read_bytes() == src.read_bytes()
    assert dumps_drawing(load_drawing(src)) == src.read_text(encoding="utf-8")


@acceptance(10, "serialization round trips")
@pytest.mark.parametrize("name", ["pipes_gost", "kip_manometers"])
def test_catalog_round_trip(data_dir, tmp_path, name):
    src = data_dir / "catalogs" / name
    save_catalog(load_catalog(src), tmp_path / "a")
    save_catalog(load_catalog(tmp_path / "a"), tmp_path / "b")
    assert bundle_bytes(tmp_path / "a") == bundle_bytes(src) == bundle_bytes(tmp_path / "b")


@acceptance(10, "serialization round trips")
@pytest.mark.parametrize("name", ["spec_blank.tkd", "spec_sample.tkd", "statement_blank.tkd"])
def test_tkd_round_trip(data_dir, tmp_path, name):
    src = data_dir / "tkd" / name
    save_tkd(load_tkd(src), tmp_path / name)
    assert (tmp_path / name).read_bytes() == src.read_bytes()
    assert dumps_tkd(loads_tkd(src.read_text(encoding="utf-8"))) == src.read_text(encoding="utf-8")


@acceptance(10, "serialization round trips")
def test_prototype_round_trip(data_dir, tmp_path):
    shipped = data_dir / "prototypes" / "trace.proto"
    m = load_prototype(data_dir / "prototypes", "trace")
    out = save_prototype(tmp_path, "trace", m)
    assert out.read_bytes() == shipped.read_bytes()
    again = save_prototype(tmp_path / "b", "trace", load_prototype(tmp_path, "trace"))
    assert again.read_bytes() == shipped.read_bytes()
    assert dumps_proto(loads_proto(shipped.read_text(encoding="utf-8"))) == shipped.read_text(encoding="utf-8")
