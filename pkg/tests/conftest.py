import numpy as np
import pytest

import synthgen

# filled by tests/test_acceptance.py; echoed after the run so the verdicts
# survive pytest's output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def recognition_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth_recog")
    return synthgen.build_recognition_corpus(root)


@pytest.fixture(scope="session")
def spotting_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth_spot")
    return synthgen.build_spotting_corpus(root)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def shifted_pair(rng, size=64, dx=1, dy=0, margin=8):
    """Textured image pair where content moves by exactly (dx, dy) px,
    realized by integer crops of a larger texture (no interpolation)."""
    big = synthgen.smooth_noise(rng, (size + 2 * margin, size + 2 * margin))
    ref = big[margin:margin + size, margin:margin + size].copy()
    tgt = big[margin - dy:margin - dy + size,
              margin - dx:margin - dx + size].copy()
    return ref, tgt
