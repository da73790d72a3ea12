import os
import sys

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest

from tabularnet.lexgraph import parse_lexicon, parse_taxonomy
from tabularnet.table import CellRole, CellStyle, RawCell, RawTable, normalize

TOY_TAXONOMY = """\
# toy tree
animal\tentity
artifact\tentity
dog\tanimal
cat\tanimal
car\tartifact
"""

TOY_LEXICON = """\
dog\tdog
cat\tcat
car\tcar
animal\tanimal
artifact\tartifact
pet\tdog,cat
thing\tentity
"""


@pytest.fixture
def toy_taxonomy():
    return parse_taxonomy(TOY_TAXONOMY)


@pytest.fixture
def toy_lexicon(toy_taxonomy):
    return parse_lexicon(TOY_LEXICON, toy_taxonomy)


def grid_of(texts, table_id="t"):
    """Normalized table with one 1x1 cell per entry of a 2-D list of strings."""
    cells = tuple(
        RawCell(r, c, text) for r, row in enumerate(texts) for c, text in enumerate(row)
    )
    return normalize(RawTable(table_id, len(texts), len(texts[0]), cells))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
