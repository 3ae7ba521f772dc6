"""Bulk image-corpus generation with the two-level font-disjoint split.

Fonts are partitioned seen/unseen first; images of seen fonts are then
stratified per class into train/val/test. All random choices happen in a
single planning pass up front, so rendering can fan out across a worker
pool and still produce byte-identical trees for any worker count. The
manifest is written last: a crashed run leaves no valid manifest.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Sequence

from .corpus import ClassEntry, ClassMap
from .font_store import FontRecord
from .raster import RasterConfig, binarize, downscale_2x, rasterize, read_png, write_png
from .shaping import Ligature, NoPresentationForm, ShapedRun, shape

MANIFEST_NAME = "manifest.jsonl"

_SPLITS = ("train", "val", "test", "unseen")


class TooFewFonts(ValueError):
    """Need at least two fonts to carve out an unseen partition."""


class IoFailure(OSError):
    """Filesystem failure while writing the dataset."""


class AllPairsSkipped(ValueError):
    """No (class, font) pair was renderable."""


class ManifestMissing(FileNotFoundError):
    """The output directory has no manifest."""


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    class_id: int
    font_id: int
    split: str


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    class_table: ClassMap
    font_table: list[dict]
    seed: int
    config_digest: str
    image_px: int
    config: dict
    skipped: list[dict]
    warnings: list[str]


@dataclass
class VerifyReport:
    ok: bool
    violations: list[str]
    checked: int


def record_path(split: str, class_id: int, font_id: int) -> str:
    return f"{split}/{class_id:05d}/{font_id:03d}.png"


def split_fonts(font_ids: Sequence[int], holdout_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Partition fonts into (seen, unseen); unseen gets round(fraction * N)
    ids chosen by a seeded uniform shuffle."""
    ids = sorted(font_ids)
    if len(ids) < 2:
        raise TooFewFonts(f"need >= 2 fonts, got {len(ids)}")
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in (0, 1)")
    n_unseen = int(holdout_fraction * len(ids) + 0.5)  # round half up
    rng = Random(seed)
    shuffled = ids[:]
    rng.shuffle(shuffled)
    unseen = sorted(shuffled[:n_unseen])
    seen = sorted(shuffled[n_unseen:])
    return seen, unseen


def split_images(
    keys: Sequence[tuple[int, int]], ratios: tuple[int, int, int], seed: int
) -> tuple[dict[tuple[int, int], str], list[str]]:
    """Stratified per-class assignment of (class_id, font_id) keys over seen
    fonts into train/val/test.

    Within each class the records are shuffled and cut at the cumulative
    ratio boundaries (floor); classes with >= 3 records are guaranteed one
    record in each split, classes with < 3 go entirely to train and are
    flagged in the returned warnings.
    """
    if sum(ratios) != 100:
        raise ValueError(f"ratios must sum to 100, got {ratios}")
    by_class: dict[int, list[tuple[int, int]]] = {}
    for key in keys:
        by_class.setdefault(key[0], []).append(key)
    assignment: dict[tuple[int, int], str] = {}
    warnings: list[str] = []
    rng = Random(f"{seed}/images")
    for class_id in sorted(by_class):
        recs = sorted(by_class[class_id], key=lambda k: k[1])
        rng.shuffle(recs)
        n = len(recs)
        if n < 3:
            for key in recs:
                assignment[key] = "train"
            warnings.append(f"class {class_id}: only {n} record(s), all assigned to train")
            continue
        c1 = n * ratios[0] // 100
        c2 = n * (ratios[0] + ratios[1]) // 100
        parts = [recs[:c1], recs[c1:c2], recs[c2:]]
        # guarantee one record per requested split, stealing from train
        for idx in (1, 2):
            if ratios[idx] > 0 and not parts[idx] and len(parts[0]) > 1:
                parts[idx].append(parts[0].pop())
        for name, part in zip(("train", "val", "test"), parts):
            for key in part:
                assignment[key] = name
    return assignment, warnings


def _config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# Per-worker rendering context, set once by the pool initializer.
_CTX: dict = {}


def _init_worker(fonts, runs, cfg, do_binarize, do_downscale, out_dir):
    _CTX["fonts"] = fonts
    _CTX["runs"] = runs
    _CTX["cfg"] = cfg
    _CTX["binarize"] = do_binarize
    _CTX["downscale"] = do_downscale
    _CTX["out_dir"] = out_dir


def _render_one(fonts, runs, cfg, do_binarize, do_downscale, out_dir, task) -> None:
    class_id, font_id, rel_path = task
    img = rasterize(runs[class_id], fonts[font_id], cfg)
    if do_binarize:
        img = binarize(img, cfg.binarize_threshold)
    if do_downscale:
        img = downscale_2x(img)
    try:
        write_png(Path(out_dir) / rel_path, img)
    except OSError as exc:
        raise IoFailure(f"{rel_path}: {exc}") from exc


def _render_chunk(tasks) -> int:
    for task in tasks:
        _render_one(
            _CTX["fonts"], _CTX["runs"], _CTX["cfg"],
            _CTX["binarize"], _CTX["downscale"], _CTX["out_dir"], task,
        )
    return len(tasks)


def generate(
    fonts: Sequence[FontRecord],
    classes: ClassMap,
    cfg: RasterConfig,
    out_dir: str | os.PathLike,
    workers: int = 1,
    *,
    seed: int,
    holdout_fraction: float = 0.25,
    ratios: tuple[int, int, int] = (80, 10, 10),
    binarize_output: bool = False,
    downscale_output: bool = False,
    progress=None,
) -> DatasetManifest:
    """Render every renderable (class, font) pair into the split tree and
    write the manifest last."""
    if not fonts:
        raise AllPairsSkipped("no fonts to render with")
    if not classes.entries:
        raise AllPairsSkipped("no classes to render")
    out_root = Path(out_dir)

    runs: dict[int, ShapedRun] = {}
    skipped: list[dict] = []
    for entry in classes.entries:
        try:
            runs[entry.class_id] = shape(entry.ligature)
        except NoPresentationForm as exc:
            skipped.append({"class_id": entry.class_id, "font_id": None, "reason": str(exc)})

    fonts_by_id = {f.font_id: f for f in fonts}
    seen, unseen = split_fonts(list(fonts_by_id), holdout_fraction, seed)
    unseen_set = set(unseen)

    seen_keys: list[tuple[int, int]] = []
    unseen_keys: list[tuple[int, int]] = []
    for entry in classes.entries:
        run = runs.get(entry.class_id)
        if run is None:
            continue
        needed = {form for form, _cls in run.forms}
        for font_id in sorted(fonts_by_id):
            font = fonts_by_id[font_id]
            missing = needed - font.coverage
            if missing:
                gaps = ", ".join(f"U+{cp:04X}" for cp in sorted(missing))
                skipped.append(
                    {"class_id": entry.class_id, "font_id": font_id, "reason": f"missing forms: {gaps}"}
                )
                continue
            key = (entry.class_id, font_id)
            (unseen_keys if font_id in unseen_set else seen_keys).append(key)
    if not seen_keys and not unseen_keys:
        raise AllPairsSkipped("every (class, font) pair lacked form coverage")

    assignment, warnings = split_images(seen_keys, ratios, seed)
    assignment.update({key: "unseen" for key in unseen_keys})

    records = [
        ManifestRecord(
            path=record_path(assignment[key], key[0], key[1]),
            class_id=key[0],
            font_id=key[1],
            split=assignment[key],
        )
        for key in sorted(assignment)
    ]
    tasks = [(r.class_id, r.font_id, r.path) for r in records]

    config = {
        "canvas_px": cfg.canvas_px,
        "fit_fraction": cfg.fit_fraction,
        "supersample": cfg.supersample,
        "background": cfg.background,
        "ink": cfg.ink,
        "binarize_threshold": cfg.binarize_threshold,
        "binarize": binarize_output,
        "downscale": downscale_output,
        "seed": seed,
        "holdout_fraction": holdout_fraction,
        "ratios": list(ratios),
        "ordering": classes.ordering,
        "num_classes": len(classes.entries),
        "num_fonts": len(fonts_by_id),
    }
    image_px = cfg.canvas_px // 2 if downscale_output else cfg.canvas_px

    try:
        for rel_dir in sorted({os.path.dirname(r.path) for r in records}):
            (out_root / rel_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    init_args = (fonts_by_id, runs, cfg, binarize_output, downscale_output, str(out_root))
    if workers <= 1:
        _init_worker(*init_args)
        done = 0
        for task in tasks:
            _render_one(fonts_by_id, runs, cfg, binarize_output, downscale_output, str(out_root), task)
            done += 1
            if progress and done % 500 == 0:
                print(f"rendered {done}/{len(tasks)}", file=progress)
    else:
        chunk_size = max(1, len(tasks) // (workers * 4))
        chunks = [tasks[i : i + chunk_size] for i in range(0, len(tasks), chunk_size)]
        done = 0
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=init_args
        ) as pool:
            for n in pool.map(_render_chunk, chunks):
                done += n
                if progress:
                    print(f"rendered {done}/{len(tasks)}", file=progress)

    manifest = DatasetManifest(
        records=records,
        class_table=classes,
        font_table=[
            {
                "font_id": fid,
                "partition": "unseen" if fid in unseen_set else "seen",
                "file": fonts_by_id[fid].file_path,
                "family": fonts_by_id[fid].family_name,
            }
            for fid in sorted(fonts_by_id)
        ],
        seed=seed,
        config_digest=_config_digest(config),
        image_px=image_px,
        config=config,
        skipped=skipped,
        warnings=warnings,
    )
    write_manifest(out_root, manifest)
    return manifest


def write_manifest(out_dir: str | os.PathLike, manifest: DatasetManifest) -> None:
    """Assemble the manifest in one pass and move it into place atomically."""
    path = Path(out_dir) / MANIFEST_NAME
    tmp = path.with_suffix(".jsonl.tmp")
    lines = []
    header = {
        "kind": "header",
        "seed": manifest.seed,
        "config_digest": manifest.config_digest,
        "image_px": manifest.image_px,
        "ordering": manifest.class_table.ordering,
        "tie_rule": manifest.class_table.tie_rule,
        "config": manifest.config,
        "skipped": manifest.skipped,
        "warnings": manifest.warnings,
    }
    lines.append(json.dumps(header, ensure_ascii=False, sort_keys=True))
    for e in manifest.class_table.entries:
        lines.append(
            json.dumps(
                {
                    "kind": "class",
                    "class_id": e.class_id,
                    "codepoints": [f"U+{cp:04X}" for cp in e.ligature.codepoints],
                    "n_chars": e.n_chars,
                    "frequency": e.frequency,
                },
                ensure_ascii=False,
            )
        )
    for f in manifest.font_table:
        lines.append(json.dumps({"kind": "font", **f}, ensure_ascii=False))
    for r in manifest.records:
        lines.append(
            json.dumps(
                {
                    "kind": "record",
                    "path": r.path,
                    "class_id": r.class_id,
                    "font_id": r.font_id,
                    "split": r.split,
                },
                ensure_ascii=False,
            )
        )
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_manifest(out_dir: str | os.PathLike) -> DatasetManifest:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.is_file():
        raise ManifestMissing(str(path))
    header = None
    classes: list[ClassEntry] = []
    fonts: list[dict] = []
    records: list[ManifestRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "header":
                header = obj
            elif kind == "class":
                cps = tuple(int(c.replace("U+", ""), 16) for c in obj["codepoints"])
                classes.append(
                    ClassEntry(
                        class_id=obj["class_id"],
                        ligature=Ligature(cps),
                        n_chars=obj["n_chars"],
                        frequency=obj["frequency"],
                    )
                )
            elif kind == "font":
                fonts.append({k: v for k, v in obj.items() if k != "kind"})
            elif kind == "record":
                records.append(
                    ManifestRecord(
                        path=obj["path"],
                        class_id=obj["class_id"],
                        font_id=obj["font_id"],
                        split=obj["split"],
                    )
                )
    if header is None:
        raise ManifestMissing(f"{path}: no header line")
    classes.sort(key=lambda e: e.class_id)
    class_table = ClassMap(
        entries=tuple(classes),
        ordering=header.get("ordering", "full"),
        tie_rule=header.get("tie_rule", ""),
    )
    return DatasetManifest(
        records=records,
        class_table=class_table,
        font_table=fonts,
        seed=header["seed"],
        config_digest=header["config_digest"],
        image_px=header["image_px"],
        config=header.get("config", {}),
        skipped=header.get("skipped", []),
        warnings=header.get("warnings", []),
    )


def verify(out_dir: str | os.PathLike) -> VerifyReport:
    """Check manifest-vs-tree integrity; every violation is itemized."""
    out_root = Path(out_dir)
    manifest = read_manifest(out_root)
    violations: list[str] = []

    class_ids = [e.class_id for e in manifest.class_table.entries]
    if class_ids != list(range(len(class_ids))):
        violations.append("class table ids are not dense 0-based")
    known_classes = set(class_ids)
    partition = {f["font_id"]: f["partition"] for f in manifest.font_table}

    seen_keys: set[tuple[int, int]] = set()
    for rec in manifest.records:
        key = (rec.class_id, rec.font_id)
        if key in seen_keys:
            violations.append(f"{rec.path}: duplicate (class_id, font_id) pair {key}")
            continue
        seen_keys.add(key)
        if rec.split not in _SPLITS:
            violations.append(f"{rec.path}: unknown split {rec.split!r}")
        if rec.class_id not in known_classes:
            violations.append(f"{rec.path}: class_id {rec.class_id} not in class table")
        font_part = partition.get(rec.font_id)
        if font_part is None:
            violations.append(f"{rec.path}: font_id {rec.font_id} not in font table")
        elif (rec.split == "unseen") != (font_part == "unseen"):
            violations.append(
                f"{rec.path}: split {rec.split!r} inconsistent with font partition {font_part!r}"
            )
        expected = record_path(rec.split, rec.class_id, rec.font_id)
        if rec.path != expected:
            violations.append(f"{rec.path}: path does not match layout {expected}")
        full = out_root / rec.path
        if not full.is_file():
            violations.append(f"{rec.path}: file missing")
            continue
        try:
            img = read_png(full)
        except Exception as exc:
            violations.append(f"{rec.path}: unreadable PNG ({exc})")
            continue
        if img.width != manifest.image_px or img.height != manifest.image_px:
            violations.append(
                f"{rec.path}: size {img.width}x{img.height} != declared {manifest.image_px}"
            )
    return VerifyReport(ok=not violations, violations=violations, checked=len(manifest.records))


def resplit(
    out_dir: str | os.PathLike,
    holdout_fraction: float,
    ratios: tuple[int, int, int],
    seed: int,
) -> DatasetManifest:
    """Re-partition an existing tree under new split parameters, moving
    images to their new split directories and rewriting the manifest."""
    out_root = Path(out_dir)
    manifest = read_manifest(out_root)
    font_ids = [f["font_id"] for f in manifest.font_table]
    seen, unseen = split_fonts(font_ids, holdout_fraction, seed)
    unseen_set = set(unseen)

    keys = [(r.class_id, r.font_id) for r in manifest.records]
    seen_keys = [k for k in keys if k[1] not in unseen_set]
    assignment, warnings = split_images(seen_keys, ratios, seed)
    assignment.update({k: "unseen" for k in keys if k[1] in unseen_set})

    old_paths = {(r.class_id, r.font_id): r.path for r in manifest.records}
    new_records = []
    for key in sorted(assignment):
        new_records.append(
            ManifestRecord(
                path=record_path(assignment[key], key[0], key[1]),
                class_id=key[0],
                font_id=key[1],
                split=assignment[key],
            )
        )
    try:
        for rec in new_records:
            old = out_root / old_paths[(rec.class_id, rec.font_id)]
            new = out_root / rec.path
            if old != new:
                new.parent.mkdir(parents=True, exist_ok=True)
                os.replace(old, new)
        # drop directories that emptied out
        for split in _SPLITS:
            base = out_root / split
            if not base.is_dir():
                continue
            for sub in sorted(base.iterdir(), reverse=True):
                if sub.is_dir() and not any(sub.iterdir()):
                    sub.rmdir()
            if not any(base.iterdir()):
                base.rmdir()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    config = dict(manifest.config)
    config.update({"seed": seed, "holdout_fraction": holdout_fraction, "ratios": list(ratios)})
    new_manifest = DatasetManifest(
        records=new_records,
        class_table=manifest.class_table,
        font_table=[
            {**f, "partition": "unseen" if f["font_id"] in unseen_set else "seen"}
            for f in manifest.font_table
        ],
        seed=seed,
        config_digest=_config_digest(config),
        image_px=manifest.image_px,
        config=config,
        skipped=manifest.skipped,
        warnings=warnings,
    )
    write_manifest(out_root, new_manifest)
    return new_manifest
