"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 usage error.  Diagnostics go to
standard error; results to standard output or the ``--out``/``--svg`` files.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .enkat.catalog import Catalog, load_catalog, pick_with_answers
from .enkat.filters import And, Filter, Not, Or, ProfileIs, SourceCatalogIs, apply_filter, parse_filter
from .enkat.table import cell_text
from .errors import ProfileError, TcgxError
from .profiles import get_profile, profiles_file


def data_dir() -> Path:
    return Path(str(resources.files("tcgx") / "data"))


def shipped_bundles() -> list[Path]:
    root = data_dir() / "catalogs"
    return sorted(p for p in root.iterdir() if (p / "table.tsv").is_file())


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _profile(args):
    return get_profile(args.profile, profiles_file(args.profiles_file))


# ---------------------------------------------------------------- drawing

def cmd_drawing_info(args):
    from .drawfile import load_drawing
    from .geomcore import EmptyExtent, Space, bbox, extent_warnings

    d = load_drawing(args.file)
    counts = {}
    for e in d.elements:
        counts[e.kind] = counts.get(e.kind, 0) + 1
    lines = [f"sheet {d.title_block.get('title', '')}", f"scale {d.scale}", f"elements {len(d.elements)}"]
    lines += [f"  {k} {v}" for k, v in sorted(counts.items())]
    try:
        r = bbox(d, Space.NATURAL)
        lines.append(f"extent natural {r.x0:.6g} {r.y0:.6g} {r.x1:.6g} {r.y1:.6g}")
        r = bbox(d, Space.PAPER)
        lines.append(f"extent paper {r.x0:.6g} {r.y0:.6g} {r.x1:.6g} {r.y1:.6g}")
    except EmptyExtent:
        lines.append("extent empty")
    for w in extent_warnings(d):
        print(f"WARN {w}", file=sys.stderr)
    _emit("\n".join(lines) + "\n", args.out)


def cmd_drawing_render(args):
    from .drawfile import drawing_primitives, load_drawing
    from .export import export_svg

    d = load_drawing(args.file)
    _emit(export_svg(drawing_primitives(d), margin=5.0), args.svg)


# ---------------------------------------------------------------- catalog

def _bundle_path(name) -> Path:
    p = Path(name)
    if p.is_dir():
        return p
    shipped = data_dir() / "catalogs" / name
    if shipped.is_dir():
        return shipped
    raise TcgxError(f"catalog bundle {name!r} not found")


def _atoms(f: Filter):
    if isinstance(f, (And, Or)):
        for p in f.parts:
            yield from _atoms(p)
    elif isinstance(f, Not):
        yield from _atoms(f.part)
    else:
        yield f


def visible_catalogs(profile, names=None) -> tuple[list[Catalog], list[Catalog]]:
    """(visible, hidden) bundles among ``names`` (default: all shipped)."""
    paths = [_bundle_path(n) for n in names] if names else shipped_bundles()
    vis, hid = [], []
    for p in paths:
        c = load_catalog(p)
        (vis if profile.sees(c.table) else hid).append(c)
    return vis, hid


def _gate(profile, catalog: Catalog):
    if not profile.sees(catalog.table):
        raise ProfileError(f"catalog {catalog.id!r} is not available in profile {profile.name!r}")


def cmd_catalog_query(args):
    prof = _profile(args)
    f = parse_filter(args.filter or "")
    vis, hid = visible_catalogs(prof, args.bundle)
    if args.bundle:
        for c in hid:
            _gate(prof, c)
    hidden_sources = {c.table.source_catalog for c in hid}
    for a in _atoms(f):
        if isinstance(a, ProfileIs) and a.code not in prof.catalog_tags:
            raise ProfileError(f"catalogs tagged {a.code} are not available in profile {prof.name!r}")
        if isinstance(a, SourceCatalogIs) and a.name in hidden_sources:
            raise ProfileError(f"catalog source {a.name!r} is not available in profile {prof.name!r}")
    lines = []
    for c in vis:
        t = c.table
        try:
            hits = apply_filter(t, f)
        except TcgxError as exc:
            if args.bundle:
                raise
            print(f"WARN {t.id}: {exc}", file=sys.stderr)
            continue
        for i in hits:
            lines.append("\t".join([t.id, str(i)] + [cell_text(v) for v in t.rows[i]]))
            if args.limit and len(lines) >= args.limit:
                break
        if args.limit and len(lines) >= args.limit:
            break
    _emit("".join(s + "\n" for s in lines), args.out)


def _pairs(items, what):
    out = {}
    for it in items or []:
        k, eq, v = it.partition("=")
        if not eq or not k:
            raise UsageError(f"{what} expects key=value, got {it!r}")
        out[k.strip()] = v
    return out


def cmd_catalog_pick(args):
    prof = _profile(args)
    cat = load_catalog(_bundle_path(args.bundle))
    _gate(prof, cat)
    answers = args.answer or []
    if args.answers:
        answers = [a for a in args.answers.split(",")] + answers
    choices = _pairs(args.choose, "--choose") or None
    outputs, _ = pick_with_answers(cat, args.row, answers, choices)
    _emit("".join(f"{k}\t{v}\n" for k, v in outputs.items()), args.out)


# -------------------------------------------------------------------- tkd

def cmd_tkd_render(args):
    from .export import export_csv, export_svg
    from .tkdmodel import layout, layout_spec_for, load_tkd

    tkd = load_tkd(args.input)
    kw = {"repeat": args.repeat, "continuation": args.dir}
    if args.chunk_height is not None:
        kw["chunk_height"] = args.chunk_height
    lay = layout(tkd, layout_spec_for(tkd, **kw))
    for w in lay.warnings:
        print(f"WARN {w}", file=sys.stderr)
    if args.csv:
        Path(args.csv).write_text(export_csv(tkd), encoding="utf-8")
    if args.svg or not args.csv:
        _emit(export_svg(lay.primitives), args.svg)


# ------------------------------------------------------------------- spec

def cmd_spec_collect(args):
    from .specgen import (
        CollectScope,
        collect,
        factor_common_names,
        fill,
        merge_identical,
        pack_sections,
        sort_rows,
    )
    from .tkdmodel import load_tkd, save_tkd

    types = [t.strip() for t in args.types.split(",") if t.strip()] if args.types else None
    errors = []
    recs = collect(CollectScope(args.files, types), errors)
    for e in errors:
        print(f"ERROR {e.path}: {e.message}", file=sys.stderr)
    into = Path(args.into)
    blank = Path(args.blank) if args.blank else (into if into.exists() else data_dir() / "tkd" / "spec_blank.tkd")
    tkd = load_tkd(blank)
    unmatched = []
    tkd = fill(tkd, recs, unmatched)
    for u in unmatched:
        print(str(u), file=sys.stderr)
    if args.sections:
        tkd = pack_sections(tkd, args.sections)
    if args.sort:
        tkd = sort_rows(tkd, [k.strip() for k in args.sort.split(",") if k.strip()])
    if args.merge:
        tkd = merge_identical(tkd, args.merge)
    if args.factor:
        tkd = factor_common_names(tkd, args.factor, args.min_prefix)
    save_tkd(tkd, into)
    print(f"{len(recs)} records from {len(args.files)} files into {into}", file=sys.stderr)


# ----------------------------------------------------------------- raster

def _floats(text, n, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) != n:
        raise UsageError(f"{what} expects {n} comma-separated numbers")
    return vals


def cmd_raster_fit(args):
    from .rasterlay import fit_segment, read_pbm

    r = read_pbm(args.pbm, args.dpi)
    fit = fit_segment(r, _floats(args.approx, 4, "--approx"), args.corridor)
    (x1, y1), (x2, y2) = fit.p1, fit.p2
    line = f"{x1:.6g} {y1:.6g} {x2:.6g} {y2:.6g} rms {fit.rms:.4g} pixels {fit.n_pixels}"
    if fit.low_confidence:
        print("WARN low confidence fit", file=sys.stderr)
    _emit(line + "\n", args.out)


def cmd_raster_stitch(args):
    from .rasterlay import read_pbm, stitch, write_pbm

    a, b = read_pbm(args.a), read_pbm(args.b)
    dx, dy = _floats(args.offset, 2, "--offset")
    if dx != int(dx) or dy != int(dy):
        raise UsageError("--offset is in whole pixels")
    write_pbm(stitch(a, b, (int(dx), int(dy))), args.out)


# ------------------------------------------------------------------ bench

def cmd_bench_catalog(args):
    from .bench import BUDGET_SECONDS, BenchSpec, bench_catalog

    rep = bench_catalog(BenchSpec(args.tables, args.rows, args.seed), oracle_fraction=args.oracle_fraction)
    _emit(rep.text(), args.out)
    if rep.mismatches:
        print(f"ERROR {rep.mismatches} oracle mismatches", file=sys.stderr)
        return 1
    if rep.battery_seconds > BUDGET_SECONDS:
        print(f"WARN battery took {rep.battery_seconds:.3f} s, over the {BUDGET_SECONDS:g} s budget",
              file=sys.stderr)
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tcgx", description="Drawing, catalog and table-document tools.")
    ap.add_argument("--version", action="version", version=f"tcgx {__version__}")
    ap.add_argument("--profile", help="work profile (default: $TCGX_PROFILE or Монтажно-технологический)")
    ap.add_argument("--profiles-file", help="profile overrides (default: ./profiles.txt if present)")
    groups = ap.add_subparsers(dest="group", metavar="GROUP")
    ap.set_defaults(group_parsers={})

    def group(name, help):
        g = groups.add_parser(name, help=help)
        ap.get_default("group_parsers")[name] = g
        return g, g.add_subparsers(dest="cmd", metavar="COMMAND")

    _, sub = group("drawing", "drawing files")
    p = sub.add_parser("info", help="summary of a drawing file")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_drawing_info)
    p = sub.add_parser("render", help="drawing to SVG")
    p.add_argument("file")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_drawing_render)

    _, sub = group("catalog", "nomenclature catalogs")
    p = sub.add_parser("query", help="rows matching a filter")
    p.add_argument("--bundle", action="append", help="bundle directory or shipped id (repeatable)")
    p.add_argument("--filter", default="")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_catalog_query)
    p = sub.add_parser("pick", help="evaluate the rules on one row")
    p.add_argument("--bundle", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--answers", help="comma-separated scripted answers")
    p.add_argument("--answer", action="append", help="one scripted answer (repeatable)")
    p.add_argument("--choose", action="append", help="key=option for embedded menus")
    p.add_argument("--out")
    p.set_defaults(func=cmd_catalog_pick)

    _, sub = group("tkd", "table documents")
    p = sub.add_parser("render", help="TKD layout to SVG and/or records to CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--chunk-height", type=float)
    p.add_argument("--repeat", choices=("header", "numbers"), default="header")
    p.add_argument("--dir", choices=("left", "right"), default="right")
    p.set_defaults(func=cmd_tkd_render)

    _, sub = group("spec", "specification generation")
    p = sub.add_parser("collect", help="harvest module records into a TKD")
    p.add_argument("--files", nargs="+", required=True)
    p.add_argument("--types", help="comma-separated module types")
    p.add_argument("--into", required=True, help="TKD file written (and read as the blank if it exists)")
    p.add_argument("--blank", help="blank TKD to fill instead of --into")
    p.add_argument("--sort")
    p.add_argument("--merge")
    p.add_argument("--sections")
    p.add_argument("--factor", help="name column to factor common prefixes of")
    p.add_argument("--min-prefix", type=int, default=4)
    p.set_defaults(func=cmd_spec_collect)

    _, sub = group("raster", "raster underlays")
    p = sub.add_parser("fit", help="fit a segment to ink near an approximation")
    p.add_argument("--pbm", required=True)
    p.add_argument("--approx", required=True, help="x1,y1,x2,y2 in paper mm")
    p.add_argument("--corridor", type=float, default=2.0)
    p.add_argument("--dpi", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_raster_fit)
    p = sub.add_parser("stitch", help="OR two rasters together")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--offset", required=True, help="dx,dy in pixels (right, down)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_raster_stitch)

    _, sub = group("bench", "benchmarks")
    p = sub.add_parser("catalog", help="filter battery over a synthetic corpus")
    p.add_argument("--tables", type=int, default=265)
    p.add_argument("--rows", type=int, default=68213)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--oracle-fraction", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_catalog)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        target = args.group_parsers.get(args.group, ap)
        target.print_usage(sys.stderr)
        return 2
    try:
        return int(args.func(args) or 0)
    except UsageError as exc:
        print(f"tcgx: usage error: {exc}", file=sys.stderr)
        return 2
    except (TcgxError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"tcgx: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
