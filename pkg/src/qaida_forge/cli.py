"""Command-line pipeline driver.

Exit codes: 0 success, 1 validation failure, 2 usage error. Progress and
diagnostics go to standard error; machine-readable results go to files and
standard output, so commands compose in shell pipelines. Flags resolve
against an optional key=value config file (command line wins), and the
effective configuration is echoed into output headers.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus, dataset, font_store, raster, shaping


def _ratios(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be integers, got {text!r}")
    if len(values) != 3:
        raise argparse.ArgumentTypeError("ratios must have exactly three components")
    if sum(values) != 100:
        raise argparse.ArgumentTypeError(f"ratios must sum to 100, got {sum(values)}")
    return values


def _default_threads() -> int:
    env = os.environ.get("QAIDA_FORGE_THREADS")
    if env and env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _resolve(args: argparse.Namespace, key: str, default, cast=str):
    """Command line beats config file beats built-in default."""
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    file_value = args._config_values.get(key.replace("_", "-"))
    if file_value is not None:
        return cast(file_value)
    return default


def _echo_config(name: str, config: dict) -> None:
    print(f"config[{name}]: {json.dumps(config, sort_keys=True)}", file=sys.stderr)


def _cmd_fonts_scan(args) -> int:
    fonts, skipped = font_store.scan_dir(args.dir)
    for path, reason in skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    if not fonts:
        print("error: no loadable fonts found", file=sys.stderr)
        return 1
    _echo_config("fonts scan", {"dir": str(args.dir), "out": str(args.out), "fonts": len(fonts)})
    font_store.write_fonts_jsonl(args.out, fonts)
    print(json.dumps({"fonts": len(fonts), "skipped": len(skipped), "out": str(args.out)}))
    return 0


def _cmd_fonts_filter(args) -> int:
    metas = font_store.read_fonts_jsonl(args.fonts)
    if not metas:
        print("error: fonts list is empty", file=sys.stderr)
        return 1
    from dataclasses import replace

    fonts = [replace(font_store.load_font(m["file"]), font_id=m["font_id"]) for m in metas]
    canonical, kept = font_store.filter_fonts(fonts, shaping.REQUIRED_ALPHABET)
    kept_ids = {f.font_id for f in kept}
    _echo_config(
        "fonts filter",
        {
            "alphabet": args.alphabet,
            "canonical_size": len(canonical),
            "kept": len(kept),
            "total": len(fonts),
        },
    )
    font_store.write_fonts_jsonl(args.out, fonts, kept_ids=kept_ids)
    print(json.dumps({"kept": len(kept), "total": len(fonts), "canonical_size": len(canonical)}))
    return 0


def _cmd_corpus_segment(args) -> int:
    with open(getattr(args, "in"), "rb") as fh:
        stats = corpus.ingest_corpus(fh)
    if not stats.entries:
        print("error: corpus yielded no ligatures", file=sys.stderr)
        return 1
    limit = args.limit
    if args.ordering == "full":
        classes = corpus.full_inventory(stats)
    elif args.ordering == "easiest":
        classes = corpus.easiest_n(stats, limit or len(stats.entries))
    else:
        classes = corpus.top_k(stats, limit or len(stats.entries))
    config = {
        "in": str(getattr(args, "in")),
        "ordering": args.ordering,
        "limit": limit,
        "classes": len(classes),
        "total_words": stats.total_words,
        "total_ligatures": stats.total_ligatures,
    }
    _echo_config("corpus segment", config)
    corpus.write_ligatures_jsonl(args.out, classes, config=config)
    print(json.dumps({"classes": len(classes), "inventory": len(stats.entries), "out": str(args.out)}))
    return 0


def _cmd_shape(args) -> int:
    for token in args.text.split():
        cps = [ord(ch) for ch in token]
        print(f"word: {token}")
        joins = ", ".join(f"U+{cp:04X}:{shaping.joining_type(cp)}" for cp in cps)
        print(f"  joining: {joins}")
        stripped = shaping.strip_to_alphabet(cps)
        if not stripped:
            print("  (nothing to shape after stripping)")
            continue
        for i, lig in enumerate(shaping.segment_ligatures(stripped)):
            logical = " ".join(f"U+{cp:04X}" for cp in lig.codepoints)
            run = shaping.shape(lig)
            visual = " ".join(f"U+{form:04X}({cls})" for form, cls in run.forms)
            print(f"  ligature {i}: [{logical}] -> visual [{visual}]")
    return 0


def _cmd_render(args) -> int:
    threads = _resolve(args, "threads", _default_threads(), int)
    size = _resolve(args, "size", 160, int)
    seed = _resolve(args, "seed", 0, int)
    fit = _resolve(args, "fit_fraction", 0.8, float)
    supersample = _resolve(args, "supersample", 4, int)
    holdout = _resolve(args, "font_holdout", 0.25, float)
    ratios = _resolve(args, "ratios", (80, 10, 10), _ratios)

    fonts = font_store.load_kept_fonts(args.fonts)
    if not fonts:
        print("error: no kept fonts in the fonts list", file=sys.stderr)
        return 1
    classes = corpus.read_ligatures_jsonl(args.ligatures)
    cfg = raster.RasterConfig(canvas_px=size, fit_fraction=fit, supersample=supersample)
    _echo_config(
        "render",
        {
            "fonts": len(fonts),
            "classes": len(classes),
            "size": size,
            "binarize": args.binarize,
            "downscale": args.downscale,
            "seed": seed,
            "threads": threads,
            "font_holdout": holdout,
            "ratios": list(ratios),
            "out_dir": str(args.out_dir),
        },
    )
    manifest = dataset.generate(
        fonts,
        classes,
        cfg,
        args.out_dir,
        workers=threads,
        seed=seed,
        holdout_fraction=holdout,
        ratios=ratios,
        binarize_output=args.binarize,
        downscale_output=args.downscale,
        progress=sys.stderr,
    )
    print(
        json.dumps(
            {
                "images": len(manifest.records),
                "skipped": len(manifest.skipped),
                "image_px": manifest.image_px,
                "config_digest": manifest.config_digest,
                "out_dir": str(args.out_dir),
            }
        )
    )
    return 0


def _cmd_split(args) -> int:
    seed = _resolve(args, "seed", 0, int)
    holdout = _resolve(args, "font_holdout", 0.25, float)
    ratios = _resolve(args, "ratios", (80, 10, 10), _ratios)
    _echo_config(
        "split",
        {"out_dir": str(args.out_dir), "font_holdout": holdout, "ratios": list(ratios), "seed": seed},
    )
    manifest = dataset.resplit(args.out_dir, holdout, ratios, seed)
    counts: dict[str, int] = {}
    for rec in manifest.records:
        counts[rec.split] = counts.get(rec.split, 0) + 1
    print(json.dumps({"records": len(manifest.records), "splits": counts}))
    return 0


def _cmd_verify(args) -> int:
    report = dataset.verify(args.out_dir)
    print(
        json.dumps(
            {"ok": report.ok, "checked": report.checked, "violations": report.violations}
        )
    )
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qaida-forge",
        description="Multi-font Urdu ligature image corpus generator.",
    )
    parser.add_argument("--config", help="key=value config file; command line overrides it")
    sub = parser.add_subparsers(dest="command", required=True)

    fonts = sub.add_parser("fonts", help="font collection commands")
    fonts_sub = fonts.add_subparsers(dest="fonts_command", required=True)
    scan = fonts_sub.add_parser("scan", help="load every font under a directory")
    scan.add_argument("--dir", required=True)
    scan.add_argument("--out", required=True)
    scan.set_defaults(func=_cmd_fonts_scan)
    filt = fonts_sub.add_parser("filter", help="keep fonts sharing the canonical alphabet coverage")
    filt.add_argument("--fonts", required=True)
    filt.add_argument("--alphabet", choices=["urdu"], default="urdu")
    filt.add_argument("--out", required=True)
    filt.set_defaults(func=_cmd_fonts_filter)

    seg = sub.add_parser("corpus", help="corpus commands")
    seg_sub = seg.add_subparsers(dest="corpus_command", required=True)
    segment = seg_sub.add_parser("segment", help="build the ligature class inventory")
    segment.add_argument("--in", required=True)
    segment.add_argument("--ordering", choices=["easiest", "top_k", "full"], required=True)
    segment.add_argument("--limit", type=int)
    segment.add_argument("--out", required=True)
    segment.set_defaults(func=_cmd_corpus_segment)

    shape_cmd = sub.add_parser("shape", help="debug-dump joining types and shaped forms")
    shape_cmd.add_argument("--text", required=True)
    shape_cmd.set_defaults(func=_cmd_shape)

    render = sub.add_parser("render", help="render the image corpus with splits")
    render.add_argument("--fonts", required=True)
    render.add_argument("--ligatures", required=True)
    render.add_argument("--size", type=int)
    render.add_argument("--fit-fraction", dest="fit_fraction", type=float)
    render.add_argument("--supersample", type=int)
    render.add_argument("--binarize", action="store_true")
    render.add_argument("--downscale", action="store_true")
    render.add_argument("--seed", type=int)
    render.add_argument("--threads", type=int)
    render.add_argument("--font-holdout", dest="font_holdout", type=float)
    render.add_argument("--ratios", type=_ratios)
    render.add_argument("--out-dir", dest="out_dir", required=True)
    render.set_defaults(func=_cmd_render)

    split = sub.add_parser("split", help="re-partition an existing output tree")
    split.add_argument("--out-dir", dest="out_dir", required=True)
    split.add_argument("--font-holdout", dest="font_holdout", type=float)
    split.add_argument("--ratios", type=_ratios)
    split.add_argument("--seed", type=int)
    split.set_defaults(func=_cmd_split)

    ver = sub.add_parser("verify", help="check manifest-vs-tree integrity")
    ver.add_argument("--out-dir", dest="out_dir", required=True)
    ver.set_defaults(func=_cmd_verify)
    return parser


_DOMAIN_ERRORS = (
    font_store.NotAFont,
    font_store.MissingTable,
    font_store.MalformedTable,
    font_store.Unmapped,
    font_store.MalformedGlyph,
    font_store.EmptyResult,
    shaping.EmptyWord,
    shaping.NoPresentationForm,
    raster.UnmappedForm,
    raster.EmptyRun,
    raster.OddDimensions,
    corpus.InvalidUtf8,
    corpus.KTooLarge,
    corpus.NTooLarge,
    dataset.TooFewFonts,
    dataset.IoFailure,
    dataset.AllPairsSkipped,
    dataset.ManifestMissing,
    ValueError,
    OSError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        args._config_values = _read_config_file(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
