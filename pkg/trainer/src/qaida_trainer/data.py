"""Dataset access through the corpus generator's external interface: the
manifest.jsonl header/tables/records and the PNG tree it describes.

Nothing here imports the generator's internals; a tree produced by any
tool that writes the same manifest format works.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image
from torch.utils.data import Dataset
from torchvision import transforms

MANIFEST_NAME = "manifest.jsonl"

SPLITS = ("train", "val", "test", "unseen")


class DataMissing(FileNotFoundError):
    """Manifest, records, or image files absent."""


@dataclass(frozen=True)
class ImageRecord:
    path: str
    class_id: int
    font_id: int
    split: str


@dataclass
class ManifestView:
    """The slice of the manifest the trainer needs."""

    root: Path
    records: list[ImageRecord]
    image_px: int
    num_classes: int
    seed: int
    unseen_font_ids: frozenset[int]


def read_manifest(tree: str | Path) -> ManifestView:
    root = Path(tree)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise DataMissing(f"no manifest at {path}")
    header = None
    records: list[ImageRecord] = []
    class_ids: set[int] = set()
    unseen: set[int] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "header":
                header = obj
            elif kind == "class":
                class_ids.add(obj["class_id"])
            elif kind == "font" and obj.get("partition") == "unseen":
                unseen.add(obj["font_id"])
            elif kind == "record":
                records.append(
                    ImageRecord(
                        path=obj["path"],
                        class_id=obj["class_id"],
                        font_id=obj["font_id"],
                        split=obj["split"],
                    )
                )
    if header is None:
        raise DataMissing(f"{path}: no header line")
    if not records:
        raise DataMissing(f"{path}: no image records")
    return ManifestView(
        root=root,
        records=records,
        image_px=header["image_px"],
        num_classes=len(class_ids),
        seed=header["seed"],
        unseen_font_ids=frozenset(unseen),
    )


def select_records(
    view: ManifestView,
    split: str,
    num_classes: int | None = None,
    font_id: int | None = None,
) -> list[ImageRecord]:
    """Records of one split, optionally cut to a class-prefix and one font.
    Order is deterministic: sorted by (class_id, font_id)."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    out = [
        r
        for r in view.records
        if r.split == split
        and (num_classes is None or r.class_id < num_classes)
        and (font_id is None or r.font_id == font_id)
    ]
    out.sort(key=lambda r: (r.class_id, r.font_id))
    return out


# geometric training augmentation; evaluation paths never apply it
AUGMENT = transforms.RandomAffine(
    degrees=5.0, translate=(0.05, 0.05), scale=(0.9, 1.1), fill=255
)


class LigatureImages(Dataset):
    """(image, class_id) pairs from the PNG tree.

    Images come out as float tensors in [0, 1], shape (1, px, px).
    Augmentation applies only when asked for; sharing RNG with the torch
    global generator keeps runs reproducible under a master seed.
    """

    def __init__(self, view: ManifestView, records: list[ImageRecord], augment: bool = False):
        self.root = view.root
        self.records = records
        self.augment = augment

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int]:
        rec = self.records[index]
        full = self.root / rec.path
        try:
            img = Image.open(full)
            img.load()
        except OSError as exc:
            raise DataMissing(f"{full}: {exc}") from exc
        if img.mode != "L":
            img = img.convert("L")
        if self.augment:
            img = AUGMENT(img)
        pixels = torch.frombuffer(bytearray(img.tobytes()), dtype=torch.uint8)
        tensor = pixels.view(1, img.height, img.width).float().div_(255.0)
        return tensor, rec.class_id
