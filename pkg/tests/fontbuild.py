"""Minimal TrueType writer for building test fixture fonts from scratch.

Independent of the code under test: every table (head, hhea, maxp, hmtx,
cmap, loca, glyf, name) is assembled by hand with real checksums, so the
parser is exercised against bytes it never produced. Also provides the
synthetic multi-font Urdu fixture family and byte-level corruption helpers.
"""
from __future__ import annotations

import struct
from pathlib import Path
from random import Random

ON_CURVE = 0x01
X_SHORT = 0x02
Y_SHORT = 0x04
REPEAT = 0x08
X_SAME_OR_POS = 0x10
Y_SAME_OR_POS = 0x20

ARG_WORDS = 0x0001
ARGS_XY = 0x0002
HAVE_SCALE = 0x0008
MORE_COMPONENTS = 0x0020
XY_SCALE = 0x0040
TWO_BY_TWO = 0x0080


def _pad4(data: bytes) -> bytes:
    return data + b"\x00" * (-len(data) % 4)


def _checksum(data: bytes) -> int:
    data = _pad4(data)
    return sum(struct.unpack(f">{len(data) // 4}I", data)) & 0xFFFFFFFF


def simple_glyph(contours) -> bytes:
    """Encode closed contours of (x, y, on_curve) points, exercising the
    short/same/repeat flag encodings where the deltas allow."""
    points = [(int(x), int(y), bool(on)) for c in contours for x, y, on in c]
    if not points:
        return b""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    header = struct.pack(
        ">hhhhh", len(contours), min(xs), min(ys), max(xs), max(ys)
    )
    end_pts = []
    total = 0
    for c in contours:
        total += len(c)
        end_pts.append(total - 1)
    body = struct.pack(f">{len(end_pts)}H", *end_pts)
    body += struct.pack(">H", 0)  # no instructions

    flags = []
    x_bytes = []
    y_bytes = []
    prev_x = prev_y = 0
    for x, y, on in points:
        dx, dy = x - prev_x, y - prev_y
        prev_x, prev_y = x, y
        flag = ON_CURVE if on else 0
        if dx == 0:
            flag |= X_SAME_OR_POS
        elif -255 <= dx <= 255:
            flag |= X_SHORT
            if dx > 0:
                flag |= X_SAME_OR_POS
            x_bytes.append(struct.pack(">B", abs(dx)))
        else:
            x_bytes.append(struct.pack(">h", dx))
        if dy == 0:
            flag |= Y_SAME_OR_POS
        elif -255 <= dy <= 255:
            flag |= Y_SHORT
            if dy > 0:
                flag |= Y_SAME_OR_POS
            y_bytes.append(struct.pack(">B", abs(dy)))
        else:
            y_bytes.append(struct.pack(">h", dy))
        flags.append(flag)

    flag_bytes = []
    i = 0
    while i < len(flags):
        run = 1
        while i + run < len(flags) and flags[i + run] == flags[i] and run < 255:
            run += 1
        if run > 1:
            flag_bytes.append(struct.pack(">BB", flags[i] | REPEAT, run - 1))
        else:
            flag_bytes.append(struct.pack(">B", flags[i]))
        i += run
    return header + body + b"".join(flag_bytes) + b"".join(x_bytes) + b"".join(y_bytes)


def composite_glyph(components, bbox=(0, 0, 0, 0)) -> bytes:
    """Encode a composite glyph. components: (gid, dx, dy, transform) where
    transform is None, ('scale', s), ('xyscale', sx, sy) or ('2x2', a, b, c, d)."""
    out = struct.pack(">hhhhh", -1, *[int(v) for v in bbox])
    for idx, (gid, dx, dy, transform) in enumerate(components):
        flags = ARGS_XY
        if idx + 1 < len(components):
            flags |= MORE_COMPONENTS
        words = not (-128 <= dx <= 127 and -128 <= dy <= 127)
        if words:
            flags |= ARG_WORDS
        tail = b""
        if transform is not None:
            kind = transform[0]
            f2 = lambda v: struct.pack(">h", int(round(v * 16384)))
            if kind == "scale":
                flags |= HAVE_SCALE
                tail = f2(transform[1])
            elif kind == "xyscale":
                flags |= XY_SCALE
                tail = f2(transform[1]) + f2(transform[2])
            elif kind == "2x2":
                flags |= TWO_BY_TWO
                tail = b"".join(f2(v) for v in transform[1:])
            else:
                raise ValueError(f"unknown transform {kind!r}")
        out += struct.pack(">HH", flags, gid)
        out += struct.pack(">hh" if words else ">bb", dx, dy)
        out += tail
    return out


def point_matched_composite(gid: int) -> bytes:
    """Composite using point indices instead of offsets (ARGS_XY unset)."""
    return struct.pack(">hhhhh", -1, 0, 0, 0, 0) + struct.pack(">HHbb", 0, gid, 0, 1)


def _cmap4_subtable(cmap: dict[int, int], force_glyph_id_array: bool) -> bytes:
    cps = sorted(cmap)
    segments = []  # (start_cp, end_cp)
    for cp in cps:
        if (
            segments
            and cp == segments[-1][1] + 1
            and cmap[cp] == cmap[segments[-1][1]] + 1
        ):
            segments[-1] = (segments[-1][0], cp)
        else:
            segments.append((cp, cp))
    segments.append((0xFFFF, 0xFFFF))
    seg_count = len(segments)

    ends = [e for _, e in segments]
    starts = [s for s, _ in segments]
    deltas = []
    ranges = []
    glyph_ids = []
    for i, (s, e) in enumerate(segments):
        if s == 0xFFFF:
            deltas.append(1)
            ranges.append(0)
        elif force_glyph_id_array:
            deltas.append(0)
            ranges.append(2 * (seg_count - i) + 2 * len(glyph_ids))
            glyph_ids.extend(cmap[cp] for cp in range(s, e + 1))
        else:
            deltas.append((cmap[s] - s) & 0xFFFF)
            ranges.append(0)

    body = struct.pack(f">{seg_count}H", *ends)
    body += struct.pack(">H", 0)
    body += struct.pack(f">{seg_count}H", *starts)
    body += struct.pack(f">{seg_count}H", *deltas)
    body += struct.pack(f">{seg_count}H", *ranges)
    if glyph_ids:
        body += struct.pack(f">{len(glyph_ids)}H", *glyph_ids)
    search_range = 2 ** (seg_count.bit_length() - 1) * 2
    entry_selector = seg_count.bit_length() - 1
    header = struct.pack(
        ">HHHHHHH",
        4,
        14 + len(body),
        0,
        seg_count * 2,
        search_range,
        entry_selector,
        seg_count * 2 - search_range,
    )
    return header + body


def _cmap12_subtable(cmap: dict[int, int]) -> bytes:
    cps = sorted(cmap)
    groups = []  # (start, end, start_gid)
    for cp in cps:
        if groups and cp == groups[-1][1] + 1 and cmap[cp] == cmap[groups[-1][1]] + 1:
            groups[-1] = (groups[-1][0], cp, groups[-1][2])
        else:
            groups.append((cp, cp, cmap[cp]))
    body = b"".join(struct.pack(">3I", s, e, g) for s, e, g in groups)
    return struct.pack(">HHIII", 12, 0, 16 + len(body), 0, len(groups)) + body


def _name_table(family: str) -> bytes:
    encoded = family.encode("utf-16-be")
    header = struct.pack(">HHH", 0, 1, 6 + 12)
    record = struct.pack(">6H", 3, 1, 0x0409, 1, len(encoded), 0)
    return header + record + encoded


def build_font(
    glyphs: list[bytes],
    cmap: dict[int, int],
    family: str = "Fixture",
    upem: int = 1000,
    ascender: int = 800,
    descender: int = -200,
    advances: list[int] | None = None,
    num_hmetrics: int | None = None,
    cmap_format: int = 4,
    cmap4_force_glyph_id_array: bool = False,
    drop_tables: tuple[str, ...] = (),
    head_magic: int = 0x5F0F3CF5,
) -> bytes:
    """Assemble a complete sfnt binary. glyphs[0] is .notdef."""
    n = len(glyphs)
    if advances is None:
        advances = [600] * n
    if num_hmetrics is None:
        num_hmetrics = n

    glyf = b""
    offsets = [0]
    for g in glyphs:
        glyf += g + b"\x00" * (-len(g) % 4)
        offsets.append(len(glyf))
    loca = struct.pack(f">{n + 1}I", *offsets)

    head = struct.pack(
        ">IIIIHHqqhhhhHHhhh",
        0x00010000,
        0x00010000,
        0,  # checkSumAdjustment, patched below
        head_magic,
        0x0003,
        upem,
        0,
        0,
        0,
        descender,
        upem,
        ascender,
        0,
        8,
        2,
        1,  # long loca
        0,
    )
    hhea = struct.pack(
        ">IhhhHhhhhhhhhhhhH",
        0x00010000,
        ascender,
        descender,
        0,
        max(advances) if advances else 0,
        0,
        0,
        max(advances) if advances else 0,
        1,
        0,
        0,
        0,
        0,
        0,
        0,
        0,
        num_hmetrics,
    )
    maxp = struct.pack(">IH", 0x00010000, n) + b"\x00" * 26
    hmtx = b"".join(
        struct.pack(">Hh", advances[i], 0) for i in range(num_hmetrics)
    ) + b"".join(struct.pack(">h", 0) for _ in range(n - num_hmetrics))

    if cmap_format == 12:
        sub = _cmap12_subtable(cmap)
        enc_id = 10
    else:
        sub = _cmap4_subtable(cmap, cmap4_force_glyph_id_array)
        enc_id = 1
    cmap_table = struct.pack(">HH", 0, 1) + struct.pack(">HHI", 3, enc_id, 12) + sub

    tables = {
        "head": head,
        "hhea": hhea,
        "maxp": maxp,
        "hmtx": hmtx,
        "cmap": cmap_table,
        "loca": loca,
        "glyf": glyf,
        "name": _name_table(family),
    }
    for tag in drop_tables:
        tables.pop(tag, None)

    tags = sorted(tables)
    num_tables = len(tags)
    entry_selector = num_tables.bit_length() - 1
    search_range = 16 * (2**entry_selector)
    header = struct.pack(
        ">IHHHH", 0x00010000, num_tables, search_range, entry_selector,
        16 * num_tables - search_range,
    )
    offset = 12 + 16 * num_tables
    directory = b""
    body = b""
    head_offset = None
    for tag in tags:
        data = tables[tag]
        if tag == "head":
            head_offset = offset
        directory += struct.pack(
            ">4sIII", tag.encode("latin-1"), _checksum(data), offset, len(data)
        )
        body += _pad4(data)
        offset += len(_pad4(data))
    font = header + directory + body
    if head_offset is not None and "head" in tables:
        total = _checksum(font)
        adjustment = (0xB1B0AFBA - total) & 0xFFFFFFFF
        font = (
            font[: head_offset + 8]
            + struct.pack(">I", adjustment)
            + font[head_offset + 12 :]
        )
    return font


def find_table(font: bytes, tag: str) -> tuple[int, int]:
    """Locate a table: (offset, length) from the directory."""
    num_tables = struct.unpack_from(">H", font, 4)[0]
    for i in range(num_tables):
        entry = 12 + 16 * i
        if font[entry : entry + 4] == tag.encode("latin-1"):
            _, offset, length = struct.unpack_from(">III", font, entry + 4)
            return offset, length
    raise KeyError(tag)


def patch_table_length(font: bytes, tag: str, new_length: int) -> bytes:
    """Shrink a table's directory length field in place (corruption helper)."""
    num_tables = struct.unpack_from(">H", font, 4)[0]
    for i in range(num_tables):
        entry = 12 + 16 * i
        if font[entry : entry + 4] == tag.encode("latin-1"):
            return (
                font[: entry + 12]
                + struct.pack(">I", new_length)
                + font[entry + 16 :]
            )
    raise KeyError(tag)


def rect(x0, y0, x1, y1):
    return [(x0, y0, True), (x1, y0, True), (x1, y1, True), (x0, y1, True)]


def rect_cw(x0, y0, x1, y1):
    return list(reversed(rect(x0, y0, x1, y1)))


def diamond(cx, cy, r):
    """Rounded diamond: on-curve at the axis points, off-curve at corners."""
    return [
        (cx, cy - r, True),
        (cx + r, cy - r, False),
        (cx + r, cy, True),
        (cx + r, cy + r, False),
        (cx, cy + r, True),
        (cx - r, cy + r, False),
        (cx - r, cy, True),
        (cx - r, cy - r, False),
    ]


def blob(cx, cy, r):
    """All-off-curve contour: a squarish blob of four implied midpoints."""
    return [
        (cx - r, cy - r, False),
        (cx + r, cy - r, False),
        (cx + r, cy + r, False),
        (cx - r, cy + r, False),
    ]


def _glyph_cells(cp: int) -> list[int]:
    """Stable per-codepoint pattern: which cells of a 4x4 grid carry ink."""
    rng = Random(f"glyph/{cp:04X}")
    count = 5 + cp % 3
    return sorted(rng.sample(range(16), count))


def _fixture_glyph(cp: int, font_index: int, jitter: int, shear: float) -> bytes:
    """One synthetic glyph: the per-codepoint cell pattern deformed by a
    per-font jitter and shear, with one cell drawn as a curved diamond."""
    rng = Random(f"font/{font_index}/{cp:04X}")
    cells = _glyph_cells(cp)
    contours = []
    for k, cell in enumerate(cells):
        row, col = divmod(cell, 4)
        x0 = 120 + col * 190
        y0 = 40 + row * 170
        x1, y1 = x0 + 150, y0 + 130
        j = lambda: rng.randint(-jitter, jitter)
        if k == 0:
            cx, cy = (x0 + x1) // 2 + j(), (y0 + y1) // 2 + j()
            pts = diamond(cx, cy, 70 + j() // 2)
        else:
            pts = [
                (x0 + j(), y0 + j(), True),
                (x1 + j(), y0 + j(), True),
                (x1 + j(), y1 + j(), True),
                (x0 + j(), y1 + j(), True),
            ]
        sheared = [
            (int(x + shear * y), int(y), on) for x, y, on in pts
        ]
        contours.append(sheared)
    return simple_glyph(contours)


def urdu_family(
    out_dir, codepoints, n_fonts: int = 20
) -> list[Path]:
    """Write a family of synthetic fonts covering the given codepoints.

    Per-codepoint ink patterns are shared across fonts; deformation grows
    with the font index so the last fonts diverge most from the rest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cps = sorted(codepoints)
    paths = []
    for i in range(n_fonts):
        jitter = 15 + 2 * i if i < n_fonts - 2 else 90
        shear = 0.0 if i < n_fonts - 2 else 0.18
        glyphs = [b""]  # .notdef
        cmap = {}
        advances = [1000]
        for cp in cps:
            cmap[cp] = len(glyphs)
            glyphs.append(_fixture_glyph(cp, i, jitter, shear))
            advances.append(950 + (cp * 13 + i * 7) % 100)
        font = build_font(
            glyphs,
            cmap,
            family=f"Fixture Sans {i:02d}",
            advances=advances,
        )
        path = out / f"fixture_{i:02d}.ttf"
        path.write_bytes(font)
        paths.append(path)
    return paths
