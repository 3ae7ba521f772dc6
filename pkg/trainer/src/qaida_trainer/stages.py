"""Staged training: Adam with plateau-halved learning rate, best-checkpoint
selection, per-epoch history, and per-font adaptation on the unseen split.

Every source of randomness in a run (shuffling, augmentation, fresh
weights) derives from the single master seed recorded in the run header.
"""
from __future__ import annotations

import copy
import csv
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch.nn import functional as F
from torch.utils.data import DataLoader

from .data import DataMissing, LigatureImages, ManifestView, read_manifest, select_records
from .evaluate import EvalReport, predict, report_from_predictions
from .model import LigatureNet, build_model, load_checkpoint, save_checkpoint


class DivergedLoss(RuntimeError):
    """Training loss became NaN or infinite."""


class FontNotUnseen(ValueError):
    """Per-font adaptation is only defined for fonts held out of training."""


HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "val_acc")


@dataclass(frozen=True)
class StageSpec:
    """Configuration for one training stage."""

    num_classes: int
    epochs: int
    lr0: float = 0.001
    plateau_factor: float = 0.5
    plateau_patience: int = 3
    min_delta: float = 0.001
    batch_size: int = 64
    weight_decay: float = 0.0
    augment: bool = True
    seed: int = 0
    device: str = "cpu"


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    lr: float
    train_loss: float
    val_acc: float


class PlateauHalving:
    """Exact stepped schedule: lr = lr0 * factor**k.

    k advances when the watched value fails to improve by more than
    min_delta for `patience` consecutive epochs.
    """

    def __init__(self, lr0: float, factor: float = 0.5, patience: int = 3,
                 min_delta: float = 0.001):
        self.lr0 = lr0
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.halvings = 0
        self.best: float | None = None
        self.stall = 0

    @property
    def lr(self) -> float:
        return self.lr0 * self.factor ** self.halvings

    def step(self, value: float) -> None:
        if self.best is None or value > self.best + self.min_delta:
            self.best = value
            self.stall = 0
            return
        self.stall += 1
        if self.stall >= self.patience:
            self.halvings += 1
            self.stall = 0


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def _train_epoch(model, loader, optimizer, device) -> float:
    model.train()
    total = 0.0
    count = 0
    for images, labels in loader:
        images = images.to(device)
        labels = labels.to(device)
        optimizer.zero_grad()
        loss = F.cross_entropy(model(images), labels)
        if not torch.isfinite(loss):
            raise DivergedLoss(f"non-finite training loss: {loss.item()}")
        loss.backward()
        optimizer.step()
        total += loss.item() * labels.numel()
        count += labels.numel()
    return total / count


def _accuracy(model, view, records, batch_size) -> float:
    truths, preds = predict(model, view, records, batch_size=batch_size)
    return sum(t == p for t, p in zip(truths, preds)) / len(truths)


def _append_history(path: Path, row: HistoryRow, first: bool) -> None:
    with open(path, "w" if first else "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if first:
            writer.writerow(HISTORY_COLUMNS)
        writer.writerow([row.epoch, row.lr, row.train_loss, row.val_acc])


def train_stage(
    spec: StageSpec,
    tree: str | Path,
    out_dir: str | Path,
    init_model: LigatureNet | None = None,
) -> tuple[LigatureNet, list[HistoryRow]]:
    """Train one stage; return the best-validation model and the history.

    Writes run.json (config and master seed), history.csv (one row per
    epoch), and best.pt (checkpoint of the highest validation accuracy)
    under out_dir.
    """
    if spec.epochs < 1:
        raise ValueError(f"need >= 1 epoch, got {spec.epochs}")
    view = read_manifest(tree)
    train_records = select_records(view, "train", num_classes=spec.num_classes)
    val_records = select_records(view, "val", num_classes=spec.num_classes)
    if not train_records or not val_records:
        raise DataMissing(
            f"{tree}: {len(train_records)} train / {len(val_records)} val "
            f"records for {spec.num_classes} classes"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "run",
        "master_seed": spec.seed,
        "stage": asdict(spec),
        "tree": str(tree),
    }
    (out / "run.json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    torch.manual_seed(spec.seed)
    device = torch.device(spec.device)
    if init_model is None:
        model = build_model(spec.num_classes)
    else:
        if init_model.num_classes != spec.num_classes:
            raise ValueError(
                f"init model has {init_model.num_classes} classes, "
                f"stage wants {spec.num_classes}"
            )
        model = copy.deepcopy(init_model)
    model.to(device)

    dataset = LigatureImages(view, train_records, augment=spec.augment)
    loader = DataLoader(
        dataset,
        batch_size=spec.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(spec.seed),
    )
    optimizer = torch.optim.Adam(
        model.parameters(), lr=spec.lr0, weight_decay=spec.weight_decay
    )
    scheduler = PlateauHalving(
        spec.lr0,
        factor=spec.plateau_factor,
        patience=spec.plateau_patience,
        min_delta=spec.min_delta,
    )

    history: list[HistoryRow] = []
    best_acc = -1.0
    best_path = out / "best.pt"
    for epoch in range(1, spec.epochs + 1):
        lr = scheduler.lr
        _set_lr(optimizer, lr)
        train_loss = _train_epoch(model, loader, optimizer, device)
        val_acc = _accuracy(model, view, val_records, spec.batch_size)
        row = HistoryRow(epoch=epoch, lr=lr, train_loss=train_loss, val_acc=val_acc)
        history.append(row)
        _append_history(out / "history.csv", row, first=epoch == 1)
        if val_acc > best_acc:
            best_acc = val_acc
            save_checkpoint(model, best_path)
        scheduler.step(val_acc)

    best = load_checkpoint(best_path)
    best.to(device)
    return best, history


def font_adaptation_split(
    view: ManifestView, font_id: int, seed: int
) -> tuple[list, list]:
    """Fixed-seed 70/30 split of one unseen font's records into an
    adaptation slice and a held-out report slice."""
    if font_id not in view.unseen_font_ids:
        raise FontNotUnseen(f"font {font_id} is not in the unseen partition")
    records = select_records(view, "unseen", font_id=font_id)
    if not records:
        raise DataMissing(f"no unseen records for font {font_id}")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    n_adapt = int(len(records) * 0.7 + 0.5)
    adapt = [records[i] for i in order[:n_adapt]]
    held = [records[i] for i in order[n_adapt:]]
    return adapt, held


def fine_tune_font(
    model: LigatureNet,
    font_id: int,
    tree: str | Path,
    out_dir: str | Path | None = None,
    lr: float = 5e-5,
    epochs: int = 5,
    batch_size: int | None = None,
    seed: int = 0,
    augment: bool = False,
) -> tuple[LigatureNet, EvalReport]:
    """Adapt every layer to one unseen font on 70% of its images; report
    on the remaining 30%. The input model is left untouched.

    Defaults differ from stage training on purpose: the whole adaptation
    slice forms one batch (normalization statistics then settle on the
    font's true statistics instead of the last small batch drawn), and no
    augmentation is applied (the point is to match this font's rendering,
    not to be invariant to perturbations of it)."""
    view = read_manifest(tree)
    adapt, held = font_adaptation_split(view, font_id, seed)
    adapt = [r for r in adapt if r.class_id < model.num_classes]
    held = [r for r in held if r.class_id < model.num_classes]
    if not adapt or not held:
        raise DataMissing(f"font {font_id} has no records for the model's classes")

    torch.manual_seed(seed)
    tuned = copy.deepcopy(model)
    loader = DataLoader(
        LigatureImages(view, adapt, augment=augment),
        batch_size=len(adapt) if batch_size is None else batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
    )
    optimizer = torch.optim.Adam(tuned.parameters(), lr=lr)
    for _ in range(epochs):
        _train_epoch(tuned, loader, optimizer, torch.device("cpu"))

    truths, preds = predict(tuned, view, held, batch_size=len(held))
    report = report_from_predictions("unseen", tuned.num_classes, truths, preds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(tuned, out / f"font_{font_id:03d}.pt")
        (out / f"font_{font_id:03d}_report.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
    return tuned, report
