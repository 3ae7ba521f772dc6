"""Residual ligature classifier: exactly 18 convolutional and 2
fully-connected layers.

Shortcuts are parameter-free (strided slice plus zero channel padding), so
the convolution count is exact. Batch-norm running statistics use a high
momentum: desk-scale corpora see few batches per epoch, and evaluation
(which runs on those statistics) would otherwise lag training by epochs.
The penultimate fully-connected layer has a fixed width, which lets a
grown classifier copy every tensor except the final layer bit for bit.
"""
from __future__ import annotations

from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F


class InvalidClassCount(ValueError):
    """A classifier needs at least two classes."""


class ShrinkNotAllowed(ValueError):
    """grow_classifier only grows the class count."""


STAGE_WIDTHS = (16, 32, 64, 128)
FEATURE_WIDTH = 256  # penultimate fully-connected width, fixed across stages
NORM_MOMENTUM = 0.5  # running stats must track within a handful of batches


def _norm(channels: int) -> nn.BatchNorm2d:
    return nn.BatchNorm2d(channels, momentum=NORM_MOMENTUM)


class BasicBlock(nn.Module):
    """Two 3x3 convolutions with a parameter-free residual shortcut."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride, 1, bias=False)
        self.norm1 = _norm(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1, bias=False)
        self.norm2 = _norm(out_channels)
        self.stride = stride
        self.pad_channels = out_channels - in_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        shortcut = x
        if self.stride != 1:
            shortcut = shortcut[:, :, :: self.stride, :: self.stride]
        if self.pad_channels:
            shortcut = F.pad(shortcut, (0, 0, 0, 0, 0, self.pad_channels))
        return F.relu(out + shortcut)


class LigatureNet(nn.Module):
    """1-channel square images in, class logits out.

    Body: 2-convolution stem (the first halves resolution) plus 4 stages
    of 2 residual blocks (2 convolutions each) = 18 convolutions. Head:
    2 fully-connected layers; the final one is the only tensor whose
    shape depends on num_classes.
    """

    def __init__(self, num_classes: int):
        super().__init__()
        if num_classes < 2:
            raise InvalidClassCount(f"need >= 2 classes, got {num_classes}")
        self.num_classes = num_classes
        width = STAGE_WIDTHS[0]
        self.stem1 = nn.Conv2d(1, width, 3, 2, 1, bias=False)
        self.stem_norm1 = _norm(width)
        self.stem2 = nn.Conv2d(width, width, 3, 1, 1, bias=False)
        self.stem_norm2 = _norm(width)
        blocks = []
        in_ch = width
        for i, out_ch in enumerate(STAGE_WIDTHS):
            for j in range(2):
                stride = 2 if (i > 0 and j == 0) else 1
                blocks.append(BasicBlock(in_ch, out_ch, stride))
                in_ch = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc1 = nn.Linear(STAGE_WIDTHS[-1], FEATURE_WIDTH)
        self.fc2 = nn.Linear(FEATURE_WIDTH, num_classes)
        self.apply(_init_weights)

    def penultimate(self, x: torch.Tensor) -> torch.Tensor:
        """Activations entering the final layer."""
        out = F.relu(self.stem_norm1(self.stem1(x)))
        out = F.relu(self.stem_norm2(self.stem2(out)))
        out = self.blocks(out)
        out = self.pool(out).flatten(1)
        return F.relu(self.fc1(out))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.penultimate(x))


def _init_weights(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv2d, nn.Linear)):
        nn.init.xavier_uniform_(module.weight)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


def build_model(num_classes: int) -> LigatureNet:
    """Fresh Xavier-initialized classifier."""
    return LigatureNet(num_classes)


FINAL_LAYER_PREFIX = "fc2."


def grow_classifier(model: LigatureNet, new_num_classes: int) -> LigatureNet:
    """A wider-headed copy: every tensor except the final layer is copied
    bit-exact; the final layer is freshly Xavier-initialized. Class ids
    0..old-1 keep their meaning because stage class lists are nested
    prefixes."""
    if new_num_classes <= model.num_classes:
        raise ShrinkNotAllowed(
            f"cannot grow {model.num_classes} -> {new_num_classes} classes"
        )
    grown = LigatureNet(new_num_classes)
    carried = {
        k: v for k, v in model.state_dict().items() if not k.startswith(FINAL_LAYER_PREFIX)
    }
    missing = grown.load_state_dict(carried, strict=False)
    assert all(k.startswith(FINAL_LAYER_PREFIX) for k in missing.missing_keys)
    assert not missing.unexpected_keys
    return grown


def save_checkpoint(model: LigatureNet, path: str | Path) -> None:
    torch.save({"num_classes": model.num_classes, "state": model.state_dict()}, path)


def load_checkpoint(path: str | Path) -> LigatureNet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = LigatureNet(payload["num_classes"])
    model.load_state_dict(payload["state"])
    model.eval()
    return model
