import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from depswap.core import PhrasePair, PhraseTable, SourceSentence, Token  # noqa: E402

# fixture W: Jokowi yesterday in Beijing made speech
# tokens 1 and 4 carry no tag in the worked example; NR is our choice
W_ROWS = [
    (1, "佐科威", "NR", 5, "nsubj"),
    (2, "昨天", "NT", 5, "tmod"),
    (3, "在", "P", 5, "prep"),
    (4, "北京", "NR", 3, "pobj"),
    (5, "发表", "VV", 0, "root"),
    (6, "讲话", "NN", 5, "dobj"),
]


def make_sentence(rows, walls=()):
    """Rows in file column order: (index, form, pos, head, label)."""
    return SourceSentence(tuple(Token(i, f, p, lab, h) for i, f, p, h, lab in rows), frozenset(walls))


def w_phrases():
    return [
        PhrasePair(("佐科威",), ("Jokowi",), (0.0,) * 4, frozenset({(0, 0)})),
        PhrasePair(("发表", "讲话"), ("made", "a", "speech"), (0.0,) * 4, frozenset({(0, 0), (1, 2)})),
        PhrasePair(("在",), ("in",), (0.0,) * 4, frozenset({(0, 0)})),
        PhrasePair(("北京",), ("Beijing",), (0.0,) * 4, frozenset({(0, 0)})),
        PhrasePair(("昨天",), ("yesterday",), (0.0,) * 4, frozenset({(0, 0)})),
    ]


# derivation order of the worked example: (span, index into w_phrases())
WORKED_STEPS = [((1, 1), 0), ((5, 6), 1), ((3, 3), 2), ((4, 4), 3), ((2, 2), 4)]
WORKED_TARGET = "Jokowi made a speech in Beijing yesterday".split()


@pytest.fixture
def W():
    return make_sentence(W_ROWS)


@pytest.fixture
def w_table():
    return PhraseTable(w_phrases())


# --- acceptance reporting ---------------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, label = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {label}")
