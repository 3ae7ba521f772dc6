"""Deterministic evaluation: full confusion matrix on one split, summarized
through the shared metrics module into a single JSON-serializable report.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from qaida_forge import metrics
from torch.utils.data import DataLoader

from .data import LigatureImages, ManifestView, select_records
from .model import LigatureNet

EVAL_SPLITS = ("val", "test", "unseen")


class EmptySplit(ValueError):
    """The requested split has no records for the model's classes."""


@dataclass
class EvalReport:
    split: str
    num_samples: int
    num_classes: int
    accuracy: float
    macro_f1: float
    per_class: list[dict] = field(default_factory=list)
    confusion_total_off_diagonal: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def predict(
    model: LigatureNet,
    view: ManifestView,
    records,
    batch_size: int = 64,
) -> tuple[list[int], list[int]]:
    """(true, predicted) class ids, in record order."""
    dataset = LigatureImages(view, records, augment=False)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    model.eval()
    truths: list[int] = []
    preds: list[int] = []
    with torch.no_grad():
        for images, labels in loader:
            logits = model(images)
            preds.extend(logits.argmax(dim=1).tolist())
            truths.extend(labels.tolist())
    return truths, preds


def confusion_matrix(truths: list[int], preds: list[int], n: int) -> list[list[int]]:
    cm = [[0] * n for _ in range(n)]
    for t, p in zip(truths, preds):
        cm[t][p] += 1
    return cm


def evaluate(
    model: LigatureNet,
    view: ManifestView,
    split: str,
    font_id: int | None = None,
    batch_size: int = 64,
) -> EvalReport:
    """Accuracy plus per-class precision/recall/F1 over one split.

    Only records whose class id fits the model's head are scored, so a
    stage model can be evaluated against a tree holding later classes.
    """
    if split not in EVAL_SPLITS:
        raise ValueError(f"split must be one of {EVAL_SPLITS}, got {split!r}")
    records = select_records(view, split, num_classes=model.num_classes, font_id=font_id)
    if not records:
        raise EmptySplit(f"no {split!r} records for {model.num_classes} classes")
    truths, preds = predict(model, view, records, batch_size=batch_size)
    return report_from_predictions(split, model.num_classes, truths, preds)


def report_from_predictions(
    split: str, num_classes: int, truths: list[int], preds: list[int]
) -> EvalReport:
    cm = confusion_matrix(truths, preds, num_classes)
    scores = metrics.precision_recall_f1(cm)
    per_class = [
        {"class_id": i, "precision": p, "recall": r, "f1": f1}
        for i, (p, r, f1) in enumerate(scores)
    ]
    off_diagonal = sum(
        cm[i][j] for i in range(num_classes) for j in range(num_classes) if i != j
    )
    return EvalReport(
        split=split,
        num_samples=len(truths),
        num_classes=num_classes,
        accuracy=metrics.accuracy(cm),
        macro_f1=metrics.macro_f1(cm),
        per_class=per_class,
        confusion_total_off_diagonal=off_diagonal,
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    """One report, one JSON document."""
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
