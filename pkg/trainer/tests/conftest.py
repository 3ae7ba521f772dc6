"""Shared fixtures: desk-scale image trees produced by driving the installed
qaida-forge pipeline end to end, plus a terminal summary that prints one
pass/fail line per acceptance test.

The trainer package itself touches the corpus only through manifest.jsonl
and the PNG tree; these fixtures honor that boundary by shelling out to
the generator CLI rather than importing its internals.
"""
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

GENERATOR_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(GENERATOR_ROOT / "tests"))  # fixture font builder

import fontbuild  # noqa: E402

SEED = 0
N_FONTS = 10
IMAGE_PX = 80
# split_fonts outcome for 10 fonts, holdout 0.25, seed 0
UNSEEN_FONTS = frozenset({1, 7, 8})
# the fixture family makes its last two fonts diverge hard; font 8 is the
# divergent one that lands in the unseen partition
DIVERGENT_UNSEEN_FONT = 8


def run_cli(*argv: str) -> str:
    proc = subprocess.run(
        ["qaida-forge", *argv], capture_output=True, text=True
    )
    assert proc.returncode == 0, f"qaida-forge {' '.join(argv)}: {proc.stderr}"
    return proc.stdout


def build_tree(base: Path, n_classes: int, n_fonts: int = N_FONTS) -> Path:
    """Render n_classes easiest ligatures x n_fonts at 80 px, seed 0."""
    from qaida_forge.shaping import REQUIRED_ALPHABET

    fonts_dir = base / "fonts"
    fontbuild.urdu_family(fonts_dir, REQUIRED_ALPHABET, n_fonts=n_fonts)
    corpus_txt = base / "corpus.txt"
    shutil.copyfile(
        GENERATOR_ROOT / "tests" / "data" / "sample_urdu.txt", corpus_txt
    )
    raw = base / "fonts-raw.jsonl"
    kept = base / "fonts.jsonl"
    ligs = base / "ligatures.jsonl"
    tree = base / "dataset"
    run_cli("fonts", "scan", "--dir", str(fonts_dir), "--out", str(raw))
    run_cli("fonts", "filter", "--fonts", str(raw), "--out", str(kept))
    run_cli(
        "corpus", "segment", "--in", str(corpus_txt),
        "--ordering", "easiest", "--limit", str(n_classes), "--out", str(ligs),
    )
    run_cli(
        "render", "--fonts", str(kept), "--ligatures", str(ligs),
        "--size", str(IMAGE_PX), "--seed", str(SEED), "--threads", "1",
        "--out-dir", str(tree),
    )
    return tree


@pytest.fixture(scope="session")
def tree_small(tmp_path_factory):
    """8 classes x 6 fonts: fast tree for unit tests."""
    return build_tree(tmp_path_factory.mktemp("tree-small"), 8, n_fonts=6)


@pytest.fixture(scope="session")
def tree50(tmp_path_factory):
    """50 easiest classes x 10 fonts: the staged-training fixture."""
    return build_tree(tmp_path_factory.mktemp("tree50"), 50)


@pytest.fixture(scope="session")
def tree150(tmp_path_factory):
    """150 easiest classes x 10 fonts: the font-adaptation fixture."""
    return build_tree(tmp_path_factory.mktemp("tree150"), 150)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            when = getattr(rep, "when", "call")
            if status in ("passed", "failed") and when != "call":
                continue
            name = nodeid.split("::")[-1]
            lines.append((name, status.upper()))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status:8s} {name}")
