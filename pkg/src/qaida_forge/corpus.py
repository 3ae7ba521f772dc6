"""Ligature inventory construction from raw Urdu text, with the class
orderings used for staged training (easiest-first and most-frequent-first).

Both orderings are total orders cut at k, so every prefix is stable:
easiest_n(k) is a prefix of easiest_n(k+1), and likewise for top_k. That
prefix property is what lets a grown classifier keep existing class ids.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import IO, Iterable, Union

from .shaping import Ligature, segment_ligatures, strip_to_alphabet


class InvalidUtf8(ValueError):
    """Input byte stream is not valid UTF-8."""


class KTooLarge(ValueError):
    """top_k asked for more classes than the inventory holds."""


class NTooLarge(ValueError):
    """easiest_n asked for more classes than the inventory holds."""


EASIEST_TIE_RULE = "ascending n_chars, then descending frequency, then ascending codepoints"
TOP_K_TIE_RULE = "descending frequency, then ascending n_chars, then ascending codepoints"


@dataclass
class CorpusStats:
    """Ligature frequency table accumulated over a text stream."""

    entries: dict[tuple[int, ...], int]
    total_words: int
    total_ligatures: int


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    ligature: Ligature
    n_chars: int
    frequency: int


@dataclass(frozen=True)
class ClassMap:
    """Dense 0-based class ids in a recorded ordering."""

    entries: tuple[ClassEntry, ...]
    ordering: str
    tie_rule: str

    def __len__(self) -> int:
        return len(self.entries)


def ingest_corpus(lines: Iterable[Union[str, bytes]]) -> CorpusStats:
    """Accumulate ligature frequencies from UTF-8 text.

    Tokens split on whitespace; anything outside the bundled Urdu alphabet
    (digits, punctuation, diacritics, other scripts) is stripped before
    segmentation. Line order never matters: counts are a commutative sum.
    """
    entries: dict[tuple[int, ...], int] = {}
    total_words = 0
    total_ligatures = 0
    for line in lines:
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InvalidUtf8(str(exc)) from exc
        for token in line.split():
            cps = strip_to_alphabet(ord(ch) for ch in token)
            if not cps:
                continue
            total_words += 1
            for lig in segment_ligatures(cps):
                entries[lig.codepoints] = entries.get(lig.codepoints, 0) + 1
                total_ligatures += 1
    return CorpusStats(entries=entries, total_words=total_words, total_ligatures=total_ligatures)


def _build_map(stats: CorpusStats, count: int, key, ordering: str, tie_rule: str) -> ClassMap:
    ranked = sorted(stats.entries.items(), key=key)
    selected = ranked[:count]
    entries = tuple(
        ClassEntry(class_id=i, ligature=Ligature(cps), n_chars=len(cps), frequency=freq)
        for i, (cps, freq) in enumerate(selected)
    )
    return ClassMap(entries=entries, ordering=ordering, tie_rule=tie_rule)


def top_k(stats: CorpusStats, k: int) -> ClassMap:
    """The k most frequent ligatures; ties go to fewer characters, then to
    the lexicographically smaller codepoint sequence."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(stats.entries):
        raise KTooLarge(f"k={k} exceeds inventory size {len(stats.entries)}")
    return _build_map(
        stats, k, lambda item: (-item[1], len(item[0]), item[0]), "top_k", TOP_K_TIE_RULE
    )


def easiest_n(stats: CorpusStats, n: int) -> ClassMap:
    """The n ligatures with the fewest characters; ties go to the more
    frequent, then to the lexicographically smaller codepoint sequence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(stats.entries):
        raise NTooLarge(f"n={n} exceeds inventory size {len(stats.entries)}")
    return _build_map(
        stats, n, lambda item: (len(item[0]), -item[1], item[0]), "easiest", EASIEST_TIE_RULE
    )


def full_inventory(stats: CorpusStats) -> ClassMap:
    """Total order over the whole inventory (easiest-first, so stage prefixes
    of any size stay valid)."""
    rendered = easiest_n(stats, len(stats.entries))
    return ClassMap(entries=rendered.entries, ordering="full", tie_rule=rendered.tie_rule)


def write_ligatures_jsonl(path: str | os.PathLike, classes: ClassMap, config: dict | None = None) -> None:
    """Header line with the ordering metadata, then one record per class."""
    header = {"ordering": classes.ordering, "tie_rule": classes.tie_rule}
    if config:
        header["config"] = config
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for e in classes.entries:
            record = {
                "class_id": e.class_id,
                "codepoints": [f"U+{cp:04X}" for cp in e.ligature.codepoints],
                "n_chars": e.n_chars,
                "frequency": e.frequency,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_ligatures_jsonl(path: str | os.PathLike) -> ClassMap:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "ordering" not in lines[0]:
        raise ValueError(f"{path}: missing ligatures header line")
    header, records = lines[0], lines[1:]
    entries = []
    for rec in records:
        cps = tuple(int(c.replace("U+", ""), 16) for c in rec["codepoints"])
        entries.append(
            ClassEntry(
                class_id=rec["class_id"],
                ligature=Ligature(cps),
                n_chars=rec["n_chars"],
                frequency=rec["frequency"],
            )
        )
    entries.sort(key=lambda e: e.class_id)
    if [e.class_id for e in entries] != list(range(len(entries))):
        raise ValueError(f"{path}: class ids not dense 0-based")
    return ClassMap(entries=tuple(entries), ordering=header["ordering"], tie_rule=header.get("tie_rule", ""))
