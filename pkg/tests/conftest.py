"""Shared fixtures: the synthetic fixture-font family, the sample corpus,
and a terminal summary that prints one pass/fail line per acceptance test."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import fontbuild  # noqa: E402

DATA_DIR = Path(__file__).resolve().parent / "data"
N_FAMILY_FONTS = 20


@pytest.fixture(scope="session")
def family_dir(tmp_path_factory):
    from qaida_forge.shaping import REQUIRED_ALPHABET

    out = tmp_path_factory.mktemp("family")
    fontbuild.urdu_family(out, REQUIRED_ALPHABET, n_fonts=N_FAMILY_FONTS)
    return out


@pytest.fixture(scope="session")
def family_fonts(family_dir):
    from qaida_forge.font_store import scan_dir

    fonts, skipped = scan_dir(family_dir)
    assert not skipped
    assert len(fonts) == N_FAMILY_FONTS
    return fonts


@pytest.fixture(scope="session")
def sample_corpus_path():
    return DATA_DIR / "sample_urdu.txt"


@pytest.fixture(scope="session")
def sample_stats(sample_corpus_path):
    from qaida_forge.corpus import ingest_corpus

    with open(sample_corpus_path, "rb") as fh:
        return ingest_corpus(fh)


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
