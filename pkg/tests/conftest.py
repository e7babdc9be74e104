import pytest

from aste_grid.corpus import AnnotatedSentence, DependencyArc, Sentence, Span, Triplet


def make(tokens, triplets=(), deps=()):
    """Shorthand: triplets as ((a0, a1), (o0, o1), sentiment); deps as (head, dep[, label])."""
    return AnnotatedSentence(
        Sentence(list(tokens)),
        [DependencyArc(d[0], d[1], d[2] if len(d) > 2 else "dep") for d in deps],
        [Triplet(Span(*a), Span(*o), s) for a, o, s in triplets],
    )


@pytest.fixture
def fig2():
    # word indices follow the grid example: Waiters=0, friendly=2, fruit=5, salad=6
    return make(
        "Waiters are friendly and the fruit salad is so so".split(),
        [((0, 0), (2, 2), "POS"), ((5, 6), (8, 9), "NEU")],
        [(2, 0, "nsubj"), (2, 1, "cop"), (9, 6, "nsubj"), (2, 9, "conj"),
         (6, 5, "compound"), (6, 4, "det"), (9, 8, "advmod"), (9, 7, "cop"), (9, 3, "cc")],
    )


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
