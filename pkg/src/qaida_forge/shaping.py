"""Urdu ligature segmentation and contextual presentation-form shaping.

Every codepoint carries a joining class: D (dual-joining), R (right-joining),
U (non-joining), C (join-causing) or T (transparent). Two adjacent
non-transparent codepoints (a, b) connect iff a is in {D, C} and b is in
{D, R, C}. A ligature is a maximal connected run; within it each letter takes
its isolated/initial/medial/final shape, and the shaped sequence is emitted in
visual (left-to-right) order. Class and form data is vendored from the
Unicode 13.0.0 character database (data/arabic_shaping.tsv) so behavior never
drifts with the host environment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

# Joining classes.
DUAL = "D"
RIGHT = "R"
NON_JOINING = "U"
CAUSING = "C"
TRANSPARENT = "T"

# Contextual classes.
ISOLATED = "isolated"
INITIAL = "initial"
MEDIAL = "medial"
FINAL = "final"

LAM = 0x0644
MAX_LIGATURE_CHARS = 8


class EmptyWord(ValueError):
    """segment_ligatures was given a zero-length word."""


class NoPresentationForm(LookupError):
    """No presentation form exists for a (codepoint, contextual class) pair."""


def _load_table():
    joining: dict[int, str] = {}
    forms: dict[tuple[int, str], int] = {}
    lam_alef: dict[int, tuple[int, int]] = {}
    base_of: dict[int, tuple[int, ...]] = {}
    letters: set[int] = set()
    classes = (ISOLATED, INITIAL, MEDIAL, FINAL)
    text = (resources.files(__package__) / "data" / "arabic_shaping.tsv").read_text("utf-8")
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip() if line.startswith(("L", "A", "C", "T")) else ""
        if not line:
            continue
        cells = line.split("\t")
        kind, cp = cells[0], int(cells[1], 16)
        if kind == "L":
            joining[cp] = cells[2]
            letters.add(cp)
            for cls, cell in zip(classes, cells[3:7]):
                if cell != "-":
                    form = int(cell, 16)
                    forms[(cp, cls)] = form
                    base_of[form] = (cp,)
        elif kind == "A":
            iso, fin = int(cells[2], 16), int(cells[3], 16)
            lam_alef[cp] = (iso, fin)
            base_of[iso] = (LAM, cp)
            base_of[fin] = (LAM, cp)
        elif kind == "C":
            joining[cp] = CAUSING
        elif kind == "T":
            joining[cp] = TRANSPARENT
    return joining, forms, lam_alef, base_of, frozenset(letters)


_JOINING, _FORMS, _LAM_ALEF, _BASE_OF, URDU_LETTERS = _load_table()

# Letters plus every presentation form they shape into: the coverage a font
# must provide to render any ligature over the alphabet.
REQUIRED_ALPHABET = frozenset(
    set(URDU_LETTERS)
    | {form for form in _BASE_OF}
)


def joining_type(cp: int) -> str:
    """Joining class of a codepoint; U for anything outside the table."""
    return _JOINING.get(cp, NON_JOINING)


def connects(a: int, b: int) -> bool:
    """True iff non-transparent codepoint a joins forward into b."""
    return joining_type(a) in (DUAL, CAUSING) and joining_type(b) in (DUAL, RIGHT, CAUSING)


@dataclass(frozen=True)
class Ligature:
    """A connected sub-word unit in logical order, free of transparent marks."""

    codepoints: tuple[int, ...]
    n_chars: int = field(init=False)

    def __post_init__(self):
        cps = tuple(self.codepoints)
        object.__setattr__(self, "codepoints", cps)
        if not cps:
            raise ValueError("ligature must contain at least one codepoint")
        if len(cps) > MAX_LIGATURE_CHARS:
            raise ValueError(f"ligature exceeds {MAX_LIGATURE_CHARS} characters: {len(cps)}")
        for cp in cps:
            if joining_type(cp) == TRANSPARENT:
                raise ValueError(f"transparent codepoint U+{cp:04X} not allowed in a ligature")
        for a, b in zip(cps, cps[1:]):
            if not connects(a, b):
                raise ValueError(f"U+{a:04X} does not join into U+{b:04X}")
        object.__setattr__(self, "n_chars", len(cps))


@dataclass(frozen=True)
class ShapedRun:
    """Presentation forms of a ligature as (form codepoint, contextual class)
    pairs in visual (left-to-right) order."""

    forms: tuple[tuple[int, str], ...]
    source: Ligature


def segment_ligatures(word: Sequence[int]) -> list[Ligature]:
    """Split a word (codepoint sequence, no whitespace) into ligatures.

    Transparent marks are stripped; a boundary falls after codepoint a with
    successor b iff a does not join forward into b.
    """
    if len(word) == 0:
        raise EmptyWord("cannot segment an empty word")
    stripped = [cp for cp in word if joining_type(cp) != TRANSPARENT]
    out: list[Ligature] = []
    group: list[int] = []
    for cp in stripped:
        if group and not connects(group[-1], cp):
            out.append(Ligature(tuple(group)))
            group = []
        group.append(cp)
    if group:
        out.append(Ligature(tuple(group)))
    return out


def _contextual_class(joins_prev: bool, joins_next: bool) -> str:
    if joins_prev and joins_next:
        return MEDIAL
    if joins_next:
        return INITIAL
    if joins_prev:
        return FINAL
    return ISOLATED


def shape(lig: Ligature) -> ShapedRun:
    """Assign contextual classes, apply lam-alef merges, map to presentation
    forms, and reverse into visual order."""
    cps = lig.codepoints
    n = len(cps)
    joins_fwd = [connects(cps[i], cps[i + 1]) for i in range(n - 1)]
    logical: list[tuple[int, str]] = []
    i = 0
    while i < n:
        joins_prev = i > 0 and joins_fwd[i - 1]
        if cps[i] == LAM and i + 1 < n and cps[i + 1] in _LAM_ALEF:
            iso, fin = _LAM_ALEF[cps[i + 1]]
            cls = FINAL if joins_prev else ISOLATED
            logical.append((fin if joins_prev else iso, cls))
            i += 2
            continue
        joins_next = i < n - 1 and joins_fwd[i]
        cls = _contextual_class(joins_prev, joins_next)
        form = _FORMS.get((cps[i], cls))
        if form is None:
            raise NoPresentationForm(f"no {cls} form for U+{cps[i]:04X}")
        logical.append((form, cls))
        i += 1
    return ShapedRun(tuple(reversed(logical)), lig)


def base_codepoints(form: int) -> tuple[int, ...]:
    """Logical-order base codepoints a presentation form decomposes to
    (two for the merged lam-alef forms, one otherwise)."""
    try:
        return _BASE_OF[form]
    except KeyError:
        raise NoPresentationForm(f"U+{form:04X} is not a known presentation form") from None


def strip_to_alphabet(token: Iterable[int]) -> list[int]:
    """Keep only bundled Urdu letters: diacritics, digits, punctuation and
    out-of-script codepoints all drop out."""
    return [cp for cp in token if cp in URDU_LETTERS]
