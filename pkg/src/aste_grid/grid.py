"""Grid tagging codec, decoding oracle and exact-match triplet metrics.

Cells are stored row <= column: cell ``(i, j)`` with ``i <= j`` tags the word
pair ``(w_i, w_j)``.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .corpus import Span, Triplet
from .errors import ConflictError, LengthMismatch, SizeError


class GridTag(IntEnum):
    N = 0
    A = 1
    O = 2  # noqa: E741
    NEG = 3
    NEU = 4
    POS = 5


NUM_TAGS = len(GridTag)
SENTIMENT_TAGS = (GridTag.NEG, GridTag.NEU, GridTag.POS)
# decoding tie-break: positive > neutral > negative
_PREFERENCE = {GridTag.POS: 2, GridTag.NEU: 1, GridTag.NEG: 0}
ORACLE_MAX_N = 10


class TagGrid:
    """Upper-triangular grid of tags over the word pairs of an ``n``-token sentence."""

    __slots__ = ("n", "_tags")

    def __init__(self, n, tags=None):
        if n < 0:
            raise ValueError("n must be >= 0")
        self.n = n
        if tags is None:
            arr = np.zeros((n, n), dtype=np.int8)
        else:
            arr = np.array(tags, dtype=np.int8)
            if arr.shape != (n, n):
                raise ValueError(f"tag array shape {arr.shape} != ({n}, {n})")
            arr = np.triu(arr)
        arr.setflags(write=False)
        self._tags = arr

    @classmethod
    def from_cells(cls, n, cells):
        """Build from ``{(i, j): tag}`` (missing cells are N)."""
        arr = np.zeros((n, n), dtype=np.int8)
        for (i, j), tag in cells.items():
            _check(n, i, j)
            arr[i, j] = int(tag)
        return cls(n, arr)

    def __getitem__(self, ij):
        i, j = ij
        _check(self.n, i, j)
        return GridTag(int(self._tags[i, j]))

    def at(self, p, q):
        """Tag of the unordered pair ``{p, q}``."""
        return GridTag(int(self._tags[min(p, q), max(p, q)]))

    def with_cell(self, i, j, tag):
        _check(self.n, i, j)
        arr = self._tags.copy()
        arr[i, j] = int(tag)
        return TagGrid(self.n, arr)

    @property
    def array(self):
        """Read-only (n, n) int8 array; the strict lower triangle is zero."""
        return self._tags

    def cells(self):
        """All ``n(n+1)/2`` cells as ``((i, j), GridTag)`` in row-major order."""
        for i in range(self.n):
            for j in range(i, self.n):
                yield (i, j), GridTag(int(self._tags[i, j]))

    def diagonal(self):
        return [GridTag(int(t)) for t in np.diag(self._tags)]

    def __eq__(self, other):
        return (isinstance(other, TagGrid) and self.n == other.n
                and np.array_equal(self._tags, other._tags))

    def __hash__(self):
        return hash((self.n, self._tags.tobytes()))

    def __repr__(self):
        nz = [(i, j, t.name) for (i, j), t in self.cells() if t != GridTag.N]
        return f"TagGrid(n={self.n}, cells={nz})"

    def to_json(self):
        cells = [[i, j, t.name] for (i, j), t in self.cells() if t != GridTag.N]
        return json.dumps({"n": self.n, "cells": cells}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else text
        n = int(obj["n"])
        cells = {}
        for i, j, name in obj["cells"]:
            cells[(int(i), int(j))] = GridTag[name]
        return cls.from_cells(n, cells)


def _check(n, i, j):
    if not (0 <= i <= j < n):
        raise IndexError(f"cell ({i}, {j}) is not upper-triangular for n={n}")


def encode_grid(s):
    """Tag every word pair of an annotated sentence."""
    n = s.n
    cells = {}

    def put(i, j, tag):
        key = (min(i, j), max(i, j))
        prev = cells.setdefault(key, tag)
        if prev != tag:
            raise ConflictError(f"cell {key} receives both {prev.name} and {tag.name}")

    for t in s.triplets:
        for span, tag in ((t.aspect, GridTag.A), (t.opinion, GridTag.O)):
            for p in span:
                for q in span:
                    if p <= q:
                        put(p, q, tag)
    for t in s.triplets:
        tag = GridTag[t.sentiment]
        for p in t.aspect:
            for q in t.opinion:
                put(p, q, tag)
    return TagGrid.from_cells(n, cells)


def _runs(diag, tag):
    spans = []
    start = None
    for i, t in enumerate(diag):
        if t == tag and start is None:
            start = i
        elif t != tag and start is not None:
            spans.append(Span(start, i - 1))
            start = None
    if start is not None:
        spans.append(Span(start, len(diag) - 1))
    return spans


def pick_sentiment(counts):
    """Most frequent sentiment tag; ties resolved POS > NEU > NEG.  None if no votes."""
    best = None
    for tag in SENTIMENT_TAGS:
        c = counts.get(tag, 0)
        if c == 0:
            continue
        if best is None or (c, _PREFERENCE[tag]) > (counts[best], _PREFERENCE[best]):
            best = tag
    return best


def decode_grid(g):
    """Recover triplets from a (possibly predicted) tag grid."""
    arr = g.array
    diag = [int(t) for t in np.diag(arr)]
    aspects = _runs(diag, GridTag.A)
    opinions = _runs(diag, GridTag.O)
    out = []
    for a in aspects:
        for o in opinions:
            # runs of different tags are disjoint, so the rectangle is one upper block
            if a.start < o.start:
                block = arr[a.start:a.end + 1, o.start:o.end + 1]
            else:
                block = arr[o.start:o.end + 1, a.start:a.end + 1]
            counts = np.bincount(block.ravel(), minlength=NUM_TAGS)
            winner = pick_sentiment({t: int(counts[t]) for t in SENTIMENT_TAGS})
            if winner is not None:
                out.append(Triplet(a, o, winner.name))
    return sorted(out, key=Triplet.sort_key)


def oracle_decode(g):
    """Exhaustive decoder over all span pairs; only for ``n <= 10``."""
    n = g.n
    if n > ORACLE_MAX_N:
        raise SizeError(f"oracle_decode is exhaustive and limited to n <= {ORACLE_MAX_N}, got {n}")

    def diag(i):
        return g[i, i]

    def maximal(start, end, tag):
        if any(diag(k) != tag for k in range(start, end + 1)):
            return False
        if start > 0 and diag(start - 1) == tag:
            return False
        if end < n - 1 and diag(end + 1) == tag:
            return False
        return True

    found = []
    for a0 in range(n):
        for a1 in range(a0, n):
            if not maximal(a0, a1, GridTag.A):
                continue
            for o0 in range(n):
                for o1 in range(o0, n):
                    if not maximal(o0, o1, GridTag.O):
                        continue
                    votes = Counter()
                    for p in range(a0, a1 + 1):
                        for q in range(o0, o1 + 1):
                            tag = g.at(p, q)
                            if tag in (GridTag.NEG, GridTag.NEU, GridTag.POS):
                                votes[tag] += 1
                    if not votes:
                        continue
                    top = max(votes.values())
                    tied = [t for t, c in votes.items() if c == top]
                    for pref in (GridTag.POS, GridTag.NEU, GridTag.NEG):
                        if pref in tied:
                            found.append(Triplet(Span(a0, a1), Span(o0, o1), pref.name))
                            break
    found.sort(key=lambda t: (t.aspect.start, t.opinion.start))
    return found


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f1: float
    predicted: int
    gold: int
    correct: int

    def as_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "predicted": self.predicted, "gold": self.gold, "correct": self.correct}


def triplet_metrics(pred, gold):
    """Micro-averaged exact-match P/R/F1 over aligned per-sentence triplet lists."""
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predicted sentences vs {len(gold)} gold")
    n_pred = n_gold = n_correct = 0
    for p_list, g_list in zip(pred, gold):
        remaining = Counter(g_list)
        n_pred += len(p_list)
        n_gold += len(g_list)
        for t in p_list:
            if remaining[t] > 0:
                remaining[t] -= 1
                n_correct += 1
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalMetrics(precision, recall, f1, n_pred, n_gold, n_correct)
