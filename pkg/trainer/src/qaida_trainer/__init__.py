"""Staged trainer for the rendered ligature corpus.

Consumes a generated image tree through its manifest; emits checkpoints,
per-epoch history as CSV, and evaluation reports as JSON.
"""
from .data import (
    DataMissing,
    ImageRecord,
    LigatureImages,
    ManifestView,
    read_manifest,
    select_records,
)
from .evaluate import EmptySplit, EvalReport, evaluate, write_report
from .model import (
    InvalidClassCount,
    LigatureNet,
    ShrinkNotAllowed,
    build_model,
    grow_classifier,
    load_checkpoint,
    save_checkpoint,
)
from .stages import (
    DivergedLoss,
    FontNotUnseen,
    HistoryRow,
    PlateauHalving,
    StageSpec,
    fine_tune_font,
    font_adaptation_split,
    train_stage,
)

__all__ = [
    "DataMissing",
    "DivergedLoss",
    "EmptySplit",
    "EvalReport",
    "FontNotUnseen",
    "HistoryRow",
    "ImageRecord",
    "InvalidClassCount",
    "LigatureImages",
    "LigatureNet",
    "ManifestView",
    "PlateauHalving",
    "ShrinkNotAllowed",
    "StageSpec",
    "build_model",
    "evaluate",
    "fine_tune_font",
    "font_adaptation_split",
    "grow_classifier",
    "load_checkpoint",
    "read_manifest",
    "save_checkpoint",
    "select_records",
    "train_stage",
    "write_report",
]
