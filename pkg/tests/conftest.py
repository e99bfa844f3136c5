import numpy as np
import pytest

from alphamix.templates import BitGrid, IrisTemplate


def random_template(rng, rows, cols, mask_p=0.85, code_p=0.5, sid="s", ident="i"):
    code = BitGrid.from_bits(rng.random((rows, cols)) < code_p)
    mask = BitGrid.from_bits(rng.random((rows, cols)) < mask_p)
    return IrisTemplate(code, mask, sid, ident)


def grid(text):
    """'1010/0110' -> BitGrid."""
    return BitGrid.from_bits(np.array([[c == "1" for c in row] for row in text.split("/")]))


def full(text, sid="s", ident="i"):
    return IrisTemplate.full_mask(grid(text), sid, ident)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
