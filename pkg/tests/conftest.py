"""Shared fixtures: small corpora for fast tests, plus the acceptance-gate
summary section."""

import sys

import numpy as np
import pytest

from videosemnet.corpus import SyntheticSpec, generate_synthetic, load_manifest


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-gate result lines even when every test passes."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A small, fast corpus: 12 items, 3 genres, low dims."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    spec = SyntheticSpec(
        num_items=12,
        num_genres=3,
        frames_per_item=16,
        feature_dim=8,
        vocab_size=30,
        sentences_per_plot=2,
        words_per_sentence=5,
        seed=0,
    )
    manifest = generate_synthetic(spec, root)
    return manifest, load_manifest(manifest), spec


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
