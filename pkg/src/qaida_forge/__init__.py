"""Font-independent Urdu ligature image corpus generator.

Pipeline: scan and filter TrueType fonts, segment a raw Urdu text corpus
into ligature classes, shape each class into presentation forms, rasterize
every (class, font) pair onto fixed-size grayscale canvases, and emit a
font-disjoint train/val/test/unseen split with a verifiable manifest.
"""

__version__ = "0.1.0"

from .corpus import (
    ClassEntry,
    ClassMap,
    CorpusStats,
    easiest_n,
    full_inventory,
    ingest_corpus,
    read_ligatures_jsonl,
    top_k,
    write_ligatures_jsonl,
)
from .dataset import (
    DatasetManifest,
    ManifestRecord,
    VerifyReport,
    generate,
    read_manifest,
    record_path,
    resplit,
    split_fonts,
    split_images,
    verify,
    write_manifest,
)
from .font_store import (
    FontRecord,
    GlyphOutline,
    filter_fonts,
    glyph_for_codepoint,
    load_font,
    load_kept_fonts,
    read_fonts_jsonl,
    scan_dir,
    write_fonts_jsonl,
)
from .metrics import accuracy, macro_f1, precision_recall_f1
from .raster import (
    RasterConfig,
    RasterImage,
    binarize,
    downscale_2x,
    rasterize,
    read_png,
    write_png,
)
from .shaping import (
    Ligature,
    ShapedRun,
    base_codepoints,
    connects,
    joining_type,
    segment_ligatures,
    shape,
    strip_to_alphabet,
)

__all__ = [name for name in dir() if not name.startswith("_")]
