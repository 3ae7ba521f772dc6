"""TrueType/OpenType parsing: codepoint coverage, quadratic glyph outlines,
and coverage-based filtering of a font collection.

Reads sfnt binaries directly (big-endian): head, maxp, cmap, hhea, hmtx,
loca, glyf, plus the naming table for the family name. Character maps are
supported in subtable formats 4 and 12 only; composite glyphs are resolved
into plain contours at lookup time with recursion capped at depth 8.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence


class NotAFont(ValueError):
    """Bad magic or unreadable table directory."""


class MissingTable(ValueError):
    """A required table (or a usable cmap subtable) is absent."""


class MalformedTable(ValueError):
    """Table offsets or lengths are internally inconsistent."""


class Unmapped(KeyError):
    """Codepoint not in the font's character map."""


class MalformedGlyph(ValueError):
    """Glyph contour data is inconsistent or unsupported."""


class EmptyResult(ValueError):
    """No font covers any codepoint of the requested alphabet."""


# Simple-glyph flag bits.
_ON_CURVE = 0x01
_X_SHORT = 0x02
_Y_SHORT = 0x04
_REPEAT = 0x08
_X_SAME_OR_POSITIVE = 0x10
_Y_SAME_OR_POSITIVE = 0x20

# Composite-glyph flag bits.
_ARG_1_AND_2_ARE_WORDS = 0x0001
_ARGS_ARE_XY_VALUES = 0x0002
_WE_HAVE_A_SCALE = 0x0008
_MORE_COMPONENTS = 0x0020
_WE_HAVE_AN_X_AND_Y_SCALE = 0x0040
_WE_HAVE_A_TWO_BY_TWO = 0x0080

_HEAD_MAGIC = 0x5F0F3CF5
_MAX_COMPOSITE_DEPTH = 8

_REQUIRED_TABLES = ("head", "maxp", "cmap", "hhea", "hmtx", "loca", "glyf")


@dataclass(frozen=True)
class GlyphOutline:
    """Fully resolved outline: closed contours of (x, y, on_curve) points in
    font units. Composite references are already flattened away."""

    contours: tuple[tuple[tuple[float, float, bool], ...], ...]
    advance_width: int
    bbox: tuple[float, float, float, float]


@dataclass(frozen=True)
class FontRecord:
    """Parsed font: identity, metrics, coverage, and outline access.

    Immutable after load; safe to share across worker processes.
    """

    font_id: int
    family_name: str
    file_path: str
    units_per_em: int
    ascender: int
    descender: int
    coverage: frozenset[int]
    glyph_count: int
    _cmap: dict[int, int] = field(repr=False, compare=False)
    _loca: tuple[int, ...] = field(repr=False, compare=False)
    _glyf: bytes = field(repr=False, compare=False)
    _advances: tuple[int, ...] = field(repr=False, compare=False)


def _u16(data: bytes, off: int) -> int:
    return struct.unpack_from(">H", data, off)[0]


def _i16(data: bytes, off: int) -> int:
    return struct.unpack_from(">h", data, off)[0]


def _u32(data: bytes, off: int) -> int:
    return struct.unpack_from(">I", data, off)[0]


def _table_directory(data: bytes) -> dict[str, bytes]:
    if len(data) < 12:
        raise NotAFont("file too short for an sfnt header")
    version = _u32(data, 0)
    if version not in (0x00010000, 0x74727565, 0x4F54544F):  # 1.0, 'true', 'OTTO'
        raise NotAFont(f"unrecognized sfnt version 0x{version:08X}")
    num_tables = _u16(data, 4)
    if num_tables == 0 or 12 + 16 * num_tables > len(data):
        raise NotAFont("table directory truncated")
    tables: dict[str, bytes] = {}
    for i in range(num_tables):
        entry = 12 + 16 * i
        tag = data[entry : entry + 4].decode("latin-1")
        offset = _u32(data, entry + 8)
        length = _u32(data, entry + 12)
        if offset + length > len(data):
            raise MalformedTable(f"table {tag!r} extends past end of file")
        tables[tag] = data[offset : offset + length]
    return tables


def _parse_cmap(cmap: bytes, num_glyphs: int) -> dict[int, int]:
    if len(cmap) < 4:
        raise MalformedTable("cmap header truncated")
    num_sub = _u16(cmap, 2)
    if 4 + 8 * num_sub > len(cmap):
        raise MalformedTable("cmap encoding records truncated")
    by_format: dict[int, int] = {}
    for i in range(num_sub):
        off = _u32(cmap, 4 + 8 * i + 4)
        if off + 2 > len(cmap):
            raise MalformedTable("cmap subtable offset out of range")
        fmt = _u16(cmap, off)
        by_format.setdefault(fmt, off)
    if 12 in by_format:
        mapping = _parse_cmap12(cmap, by_format[12])
    elif 4 in by_format:
        mapping = _parse_cmap4(cmap, by_format[4])
    else:
        raise MissingTable("no cmap subtable in format 4 or 12")
    return {cp: gid for cp, gid in mapping.items() if 0 < gid < num_glyphs}


def _parse_cmap4(cmap: bytes, off: int) -> dict[int, int]:
    if off + 14 > len(cmap):
        raise MalformedTable("cmap format 4 header truncated")
    seg_x2 = _u16(cmap, off + 6)
    if seg_x2 == 0 or seg_x2 % 2:
        raise MalformedTable("bad segCountX2 in cmap format 4")
    seg_count = seg_x2 // 2
    ends_at = off + 14
    starts_at = ends_at + seg_x2 + 2  # reservedPad between the arrays
    deltas_at = starts_at + seg_x2
    ranges_at = deltas_at + seg_x2
    if ranges_at + seg_x2 > len(cmap):
        raise MalformedTable("cmap format 4 segment arrays truncated")
    ends = struct.unpack_from(f">{seg_count}H", cmap, ends_at)
    starts = struct.unpack_from(f">{seg_count}H", cmap, starts_at)
    deltas = struct.unpack_from(f">{seg_count}H", cmap, deltas_at)
    ranges = struct.unpack_from(f">{seg_count}H", cmap, ranges_at)
    mapping: dict[int, int] = {}
    for i in range(seg_count):
        start, end, delta, roff = starts[i], ends[i], deltas[i], ranges[i]
        if start > end:
            continue
        for cp in range(start, end + 1):
            if cp == 0xFFFF:
                continue
            if roff == 0:
                gid = (cp + delta) & 0xFFFF
            else:
                # roff is relative to its own position in the range array
                pos = ranges_at + 2 * i + roff + 2 * (cp - start)
                if pos + 2 > len(cmap):
                    raise MalformedTable("cmap format 4 glyph index out of range")
                gid = _u16(cmap, pos)
                if gid != 0:
                    gid = (gid + delta) & 0xFFFF
            if gid:
                mapping[cp] = gid
    return mapping


def _parse_cmap12(cmap: bytes, off: int) -> dict[int, int]:
    if off + 16 > len(cmap):
        raise MalformedTable("cmap format 12 header truncated")
    n_groups = _u32(cmap, off + 12)
    if n_groups > 10_000_000 or off + 16 + 12 * n_groups > len(cmap):
        raise MalformedTable("cmap format 12 groups truncated")
    mapping: dict[int, int] = {}
    for g in range(n_groups):
        base = off + 16 + 12 * g
        start, end, start_gid = struct.unpack_from(">3I", cmap, base)
        if start > end or end > 0x10FFFF:
            raise MalformedTable("cmap format 12 group out of order")
        for cp in range(start, end + 1):
            mapping[cp] = start_gid + (cp - start)
    return mapping


def _parse_family_name(name: bytes, fallback: str) -> str:
    try:
        count = _u16(name, 2)
        string_off = _u16(name, 4)
        best = None
        for i in range(count):
            rec = 6 + 12 * i
            plat, enc, _lang, name_id, length, off = struct.unpack_from(">6H", name, rec)
            if name_id != 1:
                continue
            raw = name[string_off + off : string_off + off + length]
            if len(raw) < length:
                continue
            if plat in (0, 3):
                value = raw.decode("utf-16-be", "replace")
            else:
                value = raw.decode("latin-1", "replace")
            value = value.strip("\x00").strip()
            if value:
                # prefer the Windows-platform record but take anything over nothing
                if plat == 3:
                    return value
                best = best or value
        return best or fallback
    except struct.error:
        return fallback


def load_font(path: str | os.PathLike) -> FontRecord:
    """Parse a font binary into an immutable FontRecord."""
    data = Path(path).read_bytes()
    tables = _table_directory(data)
    for tag in _REQUIRED_TABLES:
        if tag not in tables:
            raise MissingTable(f"required table {tag!r} missing")

    head = tables["head"]
    if len(head) < 54:
        raise MalformedTable("head table truncated")
    if _u32(head, 12) != _HEAD_MAGIC:
        raise MalformedTable("bad head magic number")
    units_per_em = _u16(head, 18)
    if units_per_em == 0:
        raise MalformedTable("units_per_em is zero")
    loc_format = _i16(head, 50)
    if loc_format not in (0, 1):
        raise MalformedTable(f"unknown indexToLocFormat {loc_format}")

    maxp = tables["maxp"]
    if len(maxp) < 6:
        raise MalformedTable("maxp table truncated")
    num_glyphs = _u16(maxp, 4)
    if num_glyphs == 0:
        raise MalformedTable("font declares zero glyphs")

    hhea = tables["hhea"]
    if len(hhea) < 36:
        raise MalformedTable("hhea table truncated")
    ascender = _i16(hhea, 4)
    descender = _i16(hhea, 6)
    num_hmetrics = _u16(hhea, 34)
    if num_hmetrics == 0 or num_hmetrics > num_glyphs:
        raise MalformedTable("bad numberOfHMetrics")

    hmtx = tables["hmtx"]
    if 4 * num_hmetrics + 2 * (num_glyphs - num_hmetrics) > len(hmtx):
        raise MalformedTable("hmtx table truncated")
    advances = [
        _u16(hmtx, 4 * i) for i in range(num_hmetrics)
    ]
    advances += [advances[-1]] * (num_glyphs - num_hmetrics)

    loca = tables["loca"]
    if loc_format == 0:
        if 2 * (num_glyphs + 1) > len(loca):
            raise MalformedTable("loca table truncated")
        offsets = tuple(v * 2 for v in struct.unpack_from(f">{num_glyphs + 1}H", loca))
    else:
        if 4 * (num_glyphs + 1) > len(loca):
            raise MalformedTable("loca table truncated")
        offsets = struct.unpack_from(f">{num_glyphs + 1}I", loca)

    cmap = _parse_cmap(tables["cmap"], num_glyphs)

    fallback = Path(path).stem
    family = _parse_family_name(tables["name"], fallback) if "name" in tables else fallback

    return FontRecord(
        font_id=-1,
        family_name=family,
        file_path=str(path),
        units_per_em=units_per_em,
        ascender=ascender,
        descender=descender,
        coverage=frozenset(cmap),
        glyph_count=num_glyphs,
        _cmap=cmap,
        _loca=offsets,
        _glyf=tables["glyf"],
        _advances=tuple(advances),
    )


def _decode_simple(glyf: bytes, off: int, end: int, n_contours: int):
    if off + 2 * n_contours > end:
        raise MalformedGlyph("contour end-point array truncated")
    end_pts = struct.unpack_from(f">{n_contours}H", glyf, off)
    off += 2 * n_contours
    n_points = end_pts[-1] + 1 if n_contours else 0
    if any(a >= b for a, b in zip(end_pts, end_pts[1:])):
        raise MalformedGlyph("contour end points not increasing")
    if off + 2 > end:
        raise MalformedGlyph("instruction length missing")
    off += 2 + _u16(glyf, off)
    if off > end:
        raise MalformedGlyph("instructions overflow glyph record")

    flags: list[int] = []
    while len(flags) < n_points:
        if off >= end:
            raise MalformedGlyph("flag array truncated")
        flag = glyf[off]
        off += 1
        flags.append(flag)
        if flag & _REPEAT:
            if off >= end:
                raise MalformedGlyph("flag repeat count missing")
            flags.extend([flag] * glyf[off])
            off += 1
    flags = flags[:n_points]

    xs: list[int] = []
    x = 0
    for flag in flags:
        if flag & _X_SHORT:
            if off >= end:
                raise MalformedGlyph("x coordinates truncated")
            dx = glyf[off]
            off += 1
            x += dx if flag & _X_SAME_OR_POSITIVE else -dx
        elif not flag & _X_SAME_OR_POSITIVE:
            if off + 2 > end:
                raise MalformedGlyph("x coordinates truncated")
            x += _i16(glyf, off)
            off += 2
        xs.append(x)
    ys: list[int] = []
    y = 0
    for flag in flags:
        if flag & _Y_SHORT:
            if off >= end:
                raise MalformedGlyph("y coordinates truncated")
            dy = glyf[off]
            off += 1
            y += dy if flag & _Y_SAME_OR_POSITIVE else -dy
        elif not flag & _Y_SAME_OR_POSITIVE:
            if off + 2 > end:
                raise MalformedGlyph("y coordinates truncated")
            y += _i16(glyf, off)
            off += 2
        ys.append(y)

    contours = []
    start = 0
    for last in end_pts:
        pts = tuple(
            (float(xs[i]), float(ys[i]), bool(flags[i] & _ON_CURVE))
            for i in range(start, last + 1)
        )
        if len(pts) >= 2:
            contours.append(pts)
        start = last + 1
    return contours


def _decode_composite(font: FontRecord, glyf: bytes, off: int, end: int, depth: int):
    contours = []
    while True:
        if off + 4 > end:
            raise MalformedGlyph("composite component truncated")
        flags = _u16(glyf, off)
        child_gid = _u16(glyf, off + 2)
        off += 4
        if flags & _ARG_1_AND_2_ARE_WORDS:
            if off + 4 > end:
                raise MalformedGlyph("composite arguments truncated")
            arg1, arg2 = struct.unpack_from(">2h", glyf, off)
            off += 4
        else:
            if off + 2 > end:
                raise MalformedGlyph("composite arguments truncated")
            arg1, arg2 = struct.unpack_from(">2b", glyf, off)
            off += 2
        if not flags & _ARGS_ARE_XY_VALUES:
            raise MalformedGlyph("point-matching composite placement not supported")
        a, b, c, d = 1.0, 0.0, 0.0, 1.0
        if flags & _WE_HAVE_A_SCALE:
            if off + 2 > end:
                raise MalformedGlyph("composite scale truncated")
            a = d = _i16(glyf, off) / 16384.0
            off += 2
        elif flags & _WE_HAVE_AN_X_AND_Y_SCALE:
            if off + 4 > end:
                raise MalformedGlyph("composite scale truncated")
            a = _i16(glyf, off) / 16384.0
            d = _i16(glyf, off + 2) / 16384.0
            off += 4
        elif flags & _WE_HAVE_A_TWO_BY_TWO:
            if off + 8 > end:
                raise MalformedGlyph("composite matrix truncated")
            a, b, c, d = (v / 16384.0 for v in struct.unpack_from(">4h", glyf, off))
            off += 8
        child = _outline_for_gid(font, child_gid, depth + 1)
        for contour in child.contours:
            contours.append(
                tuple(
                    (a * x + c * y + arg1, b * x + d * y + arg2, on)
                    for x, y, on in contour
                )
            )
        if not flags & _MORE_COMPONENTS:
            break
    return contours


def _outline_for_gid(font: FontRecord, gid: int, depth: int = 0) -> GlyphOutline:
    if depth > _MAX_COMPOSITE_DEPTH:
        raise MalformedGlyph(f"composite nesting deeper than {_MAX_COMPOSITE_DEPTH}")
    if gid >= font.glyph_count:
        raise MalformedGlyph(f"glyph index {gid} out of range")
    start, end = font._loca[gid], font._loca[gid + 1]
    glyf = font._glyf
    if start > end or end > len(glyf):
        raise MalformedGlyph("glyph location outside glyph data")
    advance = font._advances[gid]
    if start == end:
        return GlyphOutline(contours=(), advance_width=advance, bbox=(0.0, 0.0, 0.0, 0.0))
    if end - start < 10:
        raise MalformedGlyph("glyph header truncated")
    n_contours = _i16(glyf, start)
    if n_contours >= 0:
        contours = _decode_simple(glyf, start + 10, end, n_contours)
    else:
        contours = _decode_composite(font, glyf, start + 10, end, depth)
    if contours:
        xs = [x for contour in contours for x, _, _ in contour]
        ys = [y for contour in contours for _, y, _ in contour]
        bbox = (min(xs), min(ys), max(xs), max(ys))
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)
    return GlyphOutline(contours=tuple(contours), advance_width=advance, bbox=bbox)


def glyph_for_codepoint(font: FontRecord, cp: int) -> GlyphOutline:
    """Resolve a codepoint to its fully flattened outline."""
    gid = font._cmap.get(cp)
    if gid is None:
        raise Unmapped(f"U+{cp:04X} not mapped by {font.family_name}")
    return _outline_for_gid(font, gid)


def scan_dir(directory: str | os.PathLike) -> tuple[list[FontRecord], list[tuple[str, str]]]:
    """Load every .ttf/.otf under a directory (sorted by name for stable ids).

    Returns (fonts with dense 0-based font_ids, [(file, reason)] skip list).
    """
    root = Path(directory)
    paths = sorted(
        p for p in root.iterdir() if p.is_file() and p.suffix.lower() in (".ttf", ".otf")
    )
    fonts: list[FontRecord] = []
    skipped: list[tuple[str, str]] = []
    for path in paths:
        try:
            record = load_font(path)
        except (NotAFont, MissingTable, MalformedTable) as exc:
            skipped.append((str(path), f"{type(exc).__name__}: {exc}"))
            continue
        fonts.append(replace(record, font_id=len(fonts)))
    return fonts, skipped


def filter_fonts(
    fonts: Sequence[FontRecord], alphabet: frozenset[int] | set[int]
) -> tuple[frozenset[int], list[FontRecord]]:
    """Keep fonts supporting the alphabet signature shared by the most fonts.

    Signature = coverage intersected with the alphabet. The canonical set is
    the most common signature (ties: larger set, then lexicographically
    smallest codepoint sequence); kept fonts are those whose signature is a
    superset, in ascending font_id order.
    """
    if not fonts:
        raise ValueError("fonts must be non-empty")
    if not alphabet:
        raise ValueError("alphabet must be non-empty")
    alphabet = frozenset(alphabet)
    signatures = {f.font_id: f.coverage & alphabet for f in fonts}
    if all(not sig for sig in signatures.values()):
        raise EmptyResult("no font covers any alphabet codepoint")
    counts: dict[frozenset[int], int] = {}
    for sig in signatures.values():
        counts[sig] = counts.get(sig, 0) + 1
    canonical = min(
        counts, key=lambda sig: (-counts[sig], -len(sig), tuple(sorted(sig)))
    )
    kept = sorted(
        (f for f in fonts if signatures[f.font_id] >= canonical),
        key=lambda f: f.font_id,
    )
    return canonical, kept


def write_fonts_jsonl(
    path: str | os.PathLike, fonts: Iterable[FontRecord], kept_ids: set[int] | None = None
) -> None:
    """One record per font; kept=True for every font when kept_ids is None."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in fonts:
            record = {
                "font_id": f.font_id,
                "family": f.family_name,
                "file": f.file_path,
                "units_per_em": f.units_per_em,
                "coverage_size": len(f.coverage),
                "kept": True if kept_ids is None else f.font_id in kept_ids,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_fonts_jsonl(path: str | os.PathLike) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_kept_fonts(path: str | os.PathLike) -> list[FontRecord]:
    """Re-load the kept fonts listed in a fonts.jsonl, preserving font_ids."""
    fonts = []
    for meta in read_fonts_jsonl(path):
        if not meta.get("kept", False):
            continue
        fonts.append(replace(load_font(meta["file"]), font_id=meta["font_id"]))
    return fonts
