"""Annotated sentences: data model, validation, JSON-lines I/O, synthesis, statistics."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

SENTIMENTS = ("NEG", "NEU", "POS")
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class Span:
    start: int
    end: int  # inclusive

    def __iter__(self):
        return iter(range(self.start, self.end + 1))

    def __len__(self):
        return self.end - self.start + 1

    def __contains__(self, i):
        return self.start <= i <= self.end


@dataclass(frozen=True)
class Triplet:
    aspect: Span
    opinion: Span
    sentiment: str

    def sort_key(self):
        return (self.aspect.start, self.opinion.start, self.aspect.end,
                self.opinion.end, self.sentiment)


@dataclass(frozen=True)
class DependencyArc:
    head: int
    dependent: int
    label: str = "dep"


@dataclass(frozen=True)
class Sentence:
    tokens: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def n(self):
        return len(self.tokens)


@dataclass(frozen=True)
class AnnotatedSentence:
    sentence: Sentence
    deps: tuple = ()
    triplets: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "deps", tuple(self.deps))
        object.__setattr__(self, "triplets", tuple(self.triplets))

    @property
    def tokens(self):
        return self.sentence.tokens

    @property
    def n(self):
        return self.sentence.n


@dataclass(frozen=True)
class DatasetSplit:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)


@dataclass(frozen=True)
class Stats:
    num_sentences: int = 0
    num_triplets: int = 0
    num_neg: int = 0
    num_neu: int = 0
    num_pos: int = 0

    def __add__(self, other):
        return Stats(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self):
        return (self.num_sentences, self.num_triplets, self.num_neg,
                self.num_neu, self.num_pos)


def validate(s):
    """Return the list of violated invariants; an empty list means the sentence is valid."""
    violations = []
    tokens = s.sentence.tokens
    n = len(tokens)
    if n < 1:
        violations.append("empty sentence")
    for k, tok in enumerate(tokens):
        if not isinstance(tok, str) or not tok:
            violations.append(f"token {k} is not a non-empty string")

    for arc in s.deps:
        if not (0 <= arc.head < n and 0 <= arc.dependent < n):
            violations.append(f"arc index out of range: ({arc.head}, {arc.dependent})")
        elif arc.head == arc.dependent:
            violations.append(f"self-referential arc at {arc.head}")

    spans_ok = True
    for t in s.triplets:
        for role, sp in (("aspect", t.aspect), ("opinion", t.opinion)):
            if not (0 <= sp.start <= sp.end < n):
                violations.append(f"{role} span out of range: [{sp.start}, {sp.end}]")
                spans_ok = False
        if t.sentiment not in SENTIMENTS:
            violations.append(f"unknown sentiment {t.sentiment!r}")
    if not spans_ok:
        return violations

    # every token carries at most one span (one role, one extent)
    owner = {}
    for t in s.triplets:
        if set(t.aspect) & set(t.opinion):
            violations.append(
                f"aspect and opinion overlap: [{t.aspect.start}, {t.aspect.end}] "
                f"vs [{t.opinion.start}, {t.opinion.end}]")
            continue
        for role, sp in (("aspect", t.aspect), ("opinion", t.opinion)):
            for i in sp:
                prev = owner.setdefault(i, (role, sp))
                if prev != (role, sp):
                    violations.append(f"overlapping span roles at token {i}")
    seen = {}
    for t in s.triplets:
        key = (t.aspect, t.opinion)
        if key in seen:
            if seen[key] != t.sentiment:
                violations.append(
                    f"conflicting sentiments for aspect [{t.aspect.start}, {t.aspect.end}] "
                    f"and opinion [{t.opinion.start}, {t.opinion.end}]")
            else:
                violations.append("duplicate triplet")
        seen[key] = t.sentiment
    # one message per token is enough
    return list(dict.fromkeys(violations))


# -- JSON lines ---------------------------------------------------------------

def to_record(s):
    return {
        "tokens": list(s.sentence.tokens),
        "deps": [[a.head, a.dependent, a.label] for a in s.deps],
        "triplets": [
            {"aspect": [t.aspect.start, t.aspect.end],
             "opinion": [t.opinion.start, t.opinion.end],
             "sentiment": t.sentiment}
            for t in s.triplets
        ],
    }


def from_record(rec):
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    tokens = rec["tokens"]
    if not isinstance(tokens, list):
        raise ValueError("'tokens' must be a list")
    deps = []
    for arc in rec.get("deps", []):
        head, dep, label = arc
        deps.append(DependencyArc(int(head), int(dep), str(label)))
    triplets = []
    for t in rec.get("triplets", []):
        a0, a1 = t["aspect"]
        o0, o1 = t["opinion"]
        triplets.append(Triplet(Span(int(a0), int(a1)), Span(int(o0), int(o1)), t["sentiment"]))
    return AnnotatedSentence(Sentence(tokens), deps, triplets)


def dumps(s):
    return json.dumps(to_record(s), ensure_ascii=False, separators=(",", ":"))


def load_sentences(path):
    """Read and validate one JSON-lines file."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                s = from_record(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(str(exc), line=lineno, path=path) from exc
            problems = validate(s)
            if problems:
                raise ValidationError(problems, index=len(out), path=path)
            out.append(s)
    return out


def save_sentences(sentences, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(dumps(s))
            fh.write("\n")


def load_dataset(path):
    """Load ``train.jsonl``, ``val.jsonl`` and ``test.jsonl`` from a directory."""
    path = Path(path)
    parts = {}
    for name in SPLIT_NAMES:
        f = path / f"{name}.jsonl"
        if not f.exists():
            raise FileNotFoundError(f"missing split file: {f}")
        parts[name] = load_sentences(f)
    return DatasetSplit(**parts)


def save_dataset(split, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        save_sentences(getattr(split, name), path / f"{name}.jsonl")


def dataset_stats(sentences):
    counts = Counter(t.sentiment for s in sentences for t in s.triplets)
    return Stats(
        num_sentences=len(sentences),
        num_triplets=counts["NEG"] + counts["NEU"] + counts["POS"],
        num_neg=counts["NEG"],
        num_neu=counts["NEU"],
        num_pos=counts["POS"],
    )


def is_one_to_many(s):
    """True when some aspect links to >=2 opinions or some opinion to >=2 aspects."""
    by_aspect = Counter(t.aspect for t in s.triplets)
    by_opinion = Counter(t.opinion for t in s.triplets)
    return any(c >= 2 for c in by_aspect.values()) or any(c >= 2 for c in by_opinion.values())


# -- synthetic corpus ---------------------------------------------------------

# Each opinion phrase carries a fixed polarity so the corpus is learnable.
_OPINIONS = {
    "POS": [["great"], ["top", "notch"], ["delicious"]],
    "NEU": [["okay"], ["so", "so"], ["average"]],
    "NEG": [["awful"], ["too", "salty"], ["cold"]],
}
_VERBS = {"POS": ["love"], "NEU": ["tried"], "NEG": ["hated"]}
_ASPECTS = [["waiters"], ["food"], ["fruit", "salad"], ["drinks"], ["atmosphere"],
            ["wine", "list"], ["staff"], ["bread"], ["service"], ["dessert"], ["pasta"]]
_FILLERS = [["we", "went", "there", "on", "friday", "."],
            ["i", "will", "come", "back", "tomorrow", "."],
            ["the", "place", "opened", "last", "year", "."],
            ["my", "friend", "booked", "a", "table", "."]]

# kinds cycled across the corpus; 8 of 20 slots are one-to-many
_SCHEDULE = ["single", "multi", "one_opinion_many_aspects", "one_aspect_many_opinions",
             "single", "none", "one_opinion_many_aspects", "multi",
             "one_aspect_many_opinions", "single", "one_opinion_many_aspects", "none",
             "multi", "one_aspect_many_opinions", "single", "one_opinion_many_aspects",
             "multi", "one_aspect_many_opinions", "single", "none"]


class _Builder:
    def __init__(self):
        self.tokens = []
        self.deps = []
        self.triplets = []

    def add(self, words):
        start = len(self.tokens)
        self.tokens.extend(words)
        return Span(start, len(self.tokens) - 1)

    def arc(self, head, dep, label):
        if head != dep:
            self.deps.append(DependencyArc(head, dep, label))

    def link(self, aspect, opinion, sentiment, label):
        self.triplets.append(Triplet(aspect, opinion, sentiment))
        # the opinion head governs the aspect head, as in "waiters <-nsubj- friendly"
        self.arc(opinion.end, aspect.end, label)

    def compound(self, span):
        for k in range(span.start, span.end):
            self.arc(span.end, k, "compound")

    def build(self):
        return AnnotatedSentence(Sentence(self.tokens), self.deps, self.triplets)


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _distinct(rng, seq, k):
    idx = rng.choice(len(seq), size=k, replace=False)
    return [seq[int(i)] for i in idx]


def _sentiment(rng):
    return SENTIMENTS[int(rng.choice(3, p=[0.3, 0.15, 0.55]))]


def _opinion(rng, pol):
    return _pick(rng, _OPINIONS[pol])


def _make(kind, rng):
    b = _Builder()
    if kind == "none":
        b.add(_pick(rng, _FILLERS))
        return b.build()
    if kind == "single":
        b.add(["the"])
        a = b.add(_pick(rng, _ASPECTS))
        b.compound(a)
        b.add(["was"])
        pol = _sentiment(rng)
        o = b.add(_opinion(rng, pol))
        b.compound(o)
        b.add(["."])
        b.link(a, o, pol, "nsubj")
        return b.build()
    if kind == "multi":
        first = True
        prev_o = None
        for asp in _distinct(rng, _ASPECTS, 2):
            if not first:
                b.add(["but"])
            b.add(["the"])
            a = b.add(asp)
            b.compound(a)
            b.add(["was"])
            pol = _sentiment(rng)
            o = b.add(_opinion(rng, pol))
            b.compound(o)
            b.link(a, o, pol, "nsubj")
            if prev_o is not None:
                b.arc(prev_o.end, o.end, "conj")
            prev_o = o
            first = False
        b.add(["."])
        return b.build()
    if kind == "one_opinion_many_aspects":
        pol = _sentiment(rng)
        b.add(["we"])
        v = b.add([_pick(rng, _VERBS[pol])])
        b.add(["the"])
        k = 2 + int(rng.integers(2))
        aspects = _distinct(rng, _ASPECTS, k)
        spans = []
        for j, asp in enumerate(aspects):
            if j == k - 1:
                b.add(["and"])
            elif j > 0:
                b.add([","])
            a = b.add(asp)
            b.compound(a)
            spans.append(a)
        b.add(["."])
        for a in spans:
            b.link(a, v, pol, "obj")
        return b.build()
    if kind == "one_aspect_many_opinions":
        b.add(["the"])
        a = b.add(_pick(rng, _ASPECTS))
        b.compound(a)
        b.add(["was"])
        k = 2 + int(rng.integers(2))
        # coordinated opinions share a polarity; contrast uses "but" (the multi kind)
        pol = _sentiment(rng)
        spans = []
        for j, words in enumerate(_distinct(rng, _OPINIONS[pol], k)):
            if j == k - 1:
                b.add(["and"])
            elif j > 0:
                b.add([","])
            o = b.add(words)
            b.compound(o)
            spans.append((o, pol))
        b.add(["."])
        for o, pol in spans:
            b.link(a, o, pol, "nsubj")
        return b.build()
    raise ValueError(kind)


def generate_synthetic(seed, count):
    """Deterministic toy review corpus.

    Sentence kinds follow a fixed 20-slot schedule (40% one-to-many, 15%
    without triplets) and are shuffled with ``seed``.  Same-role spans are
    never adjacent, so every sentence survives a grid round trip.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    kinds = [_SCHEDULE[i % len(_SCHEDULE)] for i in range(count)]
    order = rng.permutation(count)
    return [_make(kinds[int(i)], rng) for i in order]
