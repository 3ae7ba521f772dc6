"""Scanline rasterization of shaped ligature runs onto grayscale canvases.

Glyphs are laid out left-to-right by advance widths, the union bounding box
is uniformly scaled so its larger side equals fit_fraction * canvas_px and
centered, quadratic Beziers are flattened to line segments, and the interior
is filled by the non-zero winding rule. Coverage is estimated on a
supersample x supersample subgrid per pixel; dark ink (0) on a light
background (255).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .font_store import FontRecord, glyph_for_codepoint
from .shaping import ShapedRun

# Flattening tolerance in device pixels: sub-visible at 160 px.
_FLATTEN_TOL = 0.25


class UnmappedForm(ValueError):
    """A presentation form in the run is not covered by the font."""


class EmptyRun(ValueError):
    """The shaped run contains no forms."""


class OddDimensions(ValueError):
    """downscale_2x needs even width and height."""


@dataclass(frozen=True)
class RasterConfig:
    canvas_px: int = 160
    fit_fraction: float = 0.8
    supersample: int = 4
    background: int = 255
    ink: int = 0
    binarize_threshold: int = 128

    def __post_init__(self):
        if self.canvas_px <= 0:
            raise ValueError("canvas_px must be positive")
        if not 0.0 < self.fit_fraction <= 1.0:
            raise ValueError("fit_fraction must be in (0, 1]")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")
        if not 0 <= self.binarize_threshold <= 255:
            raise ValueError("binarize_threshold must be in [0, 255]")


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major 8-bit grayscale canvas."""

    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


def _contour_paths(points):
    """Decompose one TrueType contour into line and quad segments.

    Consecutive off-curve points imply an on-curve midpoint; a contour may
    even start off-curve. Yields ('L', p0, p1) and ('Q', p0, ctrl, p1).
    """
    pts = [(float(x), float(y), bool(on)) for x, y, on in points]
    if not any(on for _, _, on in pts):
        # all off-curve: every implied midpoint is on-curve; start at one
        mids = []
        for i, (x, y, _) in enumerate(pts):
            nx, ny, _ = pts[(i + 1) % len(pts)]
            mids.append(((x + nx) / 2.0, (y + ny) / 2.0, True))
        merged = []
        for mid, p in zip(mids, pts[1:] + pts[:1]):
            merged.append(mid)
            merged.append(p)
        pts = merged
    else:
        first_on = next(i for i, p in enumerate(pts) if p[2])
        pts = pts[first_on:] + pts[:first_on]

    segments = []
    cur = (pts[0][0], pts[0][1])
    i = 1
    n = len(pts)
    while i <= n:
        x, y, on = pts[i % n]
        if on:
            segments.append(("L", cur, (x, y)))
            cur = (x, y)
            i += 1
        else:
            nx, ny, non = pts[(i + 1) % n]
            if not non:  # two offs in a row: implied on-curve midpoint
                nx, ny = (x + nx) / 2.0, (y + ny) / 2.0
            segments.append(("Q", cur, (x, y), (nx, ny)))
            cur = (nx, ny)
            i += 2 if non else 1
    return segments


def _flatten(segments, scale: float, fixed_n: int | None = None) -> list[tuple[float, float]]:
    """Flatten one closed path to a polyline; subdivision counts depend only
    on geometry and scale, never on scheduling."""
    poly: list[tuple[float, float]] = []
    for seg in segments:
        if seg[0] == "L":
            poly.append(seg[1])
        else:
            _, p0, p1, p2 = seg
            dx = p0[0] - 2.0 * p1[0] + p2[0]
            dy = p0[1] - 2.0 * p1[1] + p2[1]
            if fixed_n is not None:
                n = fixed_n
            else:
                dev = math.hypot(dx, dy) * scale  # 4x the max curve-chord distance
                n = max(1, math.ceil(math.sqrt(dev / (4.0 * _FLATTEN_TOL))))
            for k in range(n):
                t = k / n
                u = 1.0 - t
                poly.append(
                    (
                        u * u * p0[0] + 2.0 * t * u * p1[0] + t * t * p2[0],
                        u * u * p0[1] + 2.0 * t * u * p1[1] + t * t * p2[1],
                    )
                )
    return poly


def _fill_nonzero(polys, size: int, supersample: int) -> np.ndarray:
    """Per-pixel coverage of the non-zero-winding interior of closed polylines
    given in subgrid coordinates (size*supersample per axis)."""
    ss = supersample
    grid = size * ss
    coverage = np.zeros((size, size), dtype=np.float64)

    x0s, y0s, x1s, y1s = [], [], [], []
    for poly in polys:
        if len(poly) < 2:
            continue
        arr = np.asarray(poly, dtype=np.float64)
        nxt = np.roll(arr, -1, axis=0)
        x0s.append(arr[:, 0])
        y0s.append(arr[:, 1])
        x1s.append(nxt[:, 0])
        y1s.append(nxt[:, 1])
    if not x0s:
        return coverage
    x0 = np.concatenate(x0s)
    y0 = np.concatenate(y0s)
    x1 = np.concatenate(x1s)
    y1 = np.concatenate(y1s)

    keep = y0 != y1
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    if x0.size == 0:
        return coverage

    direction = np.where(y1 > y0, 1, -1).astype(np.int64)
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    # scanline j samples at j + 0.5; edge covers rows with ylo <= j+0.5 < yhi
    j0 = np.maximum(np.ceil(ylo - 0.5).astype(np.int64), 0)
    j1 = np.minimum(np.ceil(yhi - 0.5).astype(np.int64) - 1, grid - 1)
    counts = np.maximum(j1 - j0 + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return coverage

    edge_idx = np.repeat(np.arange(x0.size), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    rows = j0[edge_idx] + offsets
    ys = rows + 0.5
    slope = (x1 - x0) / (y1 - y0)
    xs = x0[edge_idx] + (ys - y0[edge_idx]) * slope[edge_idx]
    dirs = direction[edge_idx]

    order = np.lexsort((xs, rows))
    rows = rows[order]
    xs = xs[order]
    winding = np.cumsum(dirs[order])

    # interval between crossings k and k+1 (same row) is inside iff the
    # running winding after crossing k is non-zero
    same_row = rows[:-1] == rows[1:]
    inside = same_row & (winding[:-1] != 0)
    if not inside.any():
        return coverage
    row_in = rows[:-1][inside]
    xa = xs[:-1][inside]
    xb = xs[1:][inside]
    i0 = np.maximum(np.ceil(xa - 0.5).astype(np.int64), 0)
    i1 = np.minimum(np.ceil(xb - 0.5).astype(np.int64) - 1, grid - 1)
    ok = i0 <= i1
    if not ok.any():
        return coverage
    row_in, i0, i1 = row_in[ok], i0[ok], i1[ok]

    diff = np.zeros(grid * (grid + 1), dtype=np.int32)
    np.add.at(diff, row_in * (grid + 1) + i0, 1)
    np.add.at(diff, row_in * (grid + 1) + i1 + 1, -1)
    filled = np.cumsum(diff.reshape(grid, grid + 1), axis=1)[:, :grid] > 0
    coverage = filled.reshape(size, ss, size, ss).sum(axis=(1, 3)) / float(ss * ss)
    return coverage


def rasterize(run: ShapedRun, font: FontRecord, cfg: RasterConfig) -> RasterImage:
    """Render a shaped run; deterministic for identical (run, font, cfg)."""
    if not run.forms:
        raise EmptyRun("shaped run has no forms")

    paths = []
    pen = 0.0
    for form, _cls in run.forms:
        if form not in font.coverage:
            raise UnmappedForm(f"font {font.family_name!r} lacks U+{form:04X}")
        glyph = glyph_for_codepoint(font, form)
        for contour in glyph.contours:
            shifted = tuple((x + pen, y, on) for x, y, on in contour)
            paths.append(_contour_paths(shifted))
        pen += glyph.advance_width

    blank = np.full((cfg.canvas_px, cfg.canvas_px), cfg.background, dtype=np.uint8)
    if not paths:
        return RasterImage(cfg.canvas_px, cfg.canvas_px, blank)

    # bbox pass: fixed subdivision bounds curve extremes to within
    # |p0 - 2*p1 + p2| / 1024 font units, independent of the final scale
    coarse = [pt for segs in paths for pt in _flatten(segs, 0.0, fixed_n=16)]
    xs = [p[0] for p in coarse]
    ys = [p[1] for p in coarse]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    side = max(xmax - xmin, ymax - ymin)
    if side <= 0.0:
        return RasterImage(cfg.canvas_px, cfg.canvas_px, blank)

    scale = cfg.fit_fraction * cfg.canvas_px / side
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    ss = cfg.supersample
    half = cfg.canvas_px * ss / 2.0

    polys = []
    for segs in paths:
        poly = _flatten(segs, scale)
        sub = [
            ((x - cx) * scale * ss + half, (cy - y) * scale * ss + half)
            for x, y in poly
        ]
        polys.append(sub)

    coverage = _fill_nonzero(polys, cfg.canvas_px, ss)
    values = cfg.background + (cfg.ink - cfg.background) * coverage
    pixels = np.rint(values).astype(np.uint8)
    return RasterImage(cfg.canvas_px, cfg.canvas_px, pixels)


def binarize(img: RasterImage, threshold: int = 128) -> RasterImage:
    """Pixels below the threshold become 0, the rest 255. Idempotent."""
    pixels = np.where(img.pixels < threshold, 0, 255).astype(np.uint8)
    return RasterImage(img.width, img.height, pixels)


def downscale_2x(img: RasterImage) -> RasterImage:
    """Halve both dimensions; each output pixel is the round-half-up mean of
    its 2x2 source block."""
    if img.width % 2 or img.height % 2:
        raise OddDimensions(f"dimensions {img.width}x{img.height} not even")
    h, w = img.height // 2, img.width // 2
    sums = img.pixels.astype(np.uint32).reshape(h, 2, w, 2).sum(axis=(1, 3))
    pixels = ((sums + 2) // 4).astype(np.uint8)
    return RasterImage(w, h, pixels)


def write_png(path, img: RasterImage) -> None:
    """8-bit single-channel PNG, no interlacing, no color profile."""
    Image.fromarray(img.pixels, mode="L").save(path, format="PNG")


def read_png(path) -> RasterImage:
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"{path}: expected 8-bit grayscale, got {im.mode}")
        arr = np.asarray(im, dtype=np.uint8)
    return RasterImage(arr.shape[1], arr.shape[0], arr)
