"""Word embedding tables: GloVe-style text loading, double embeddings, toy tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, ParseError

log = logging.getLogger(__name__)

UNK = "<unk>"


@dataclass
class EmbeddingTable:
    vocab: dict
    matrix: np.ndarray
    trainable: bool = False

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 1 or self.matrix.shape[1] < 1:
            raise DimensionError(f"embedding matrix must be V x d with V, d >= 1, got {self.matrix.shape}")
        if any(not 0 <= i < self.matrix.shape[0] for i in self.vocab.values()):
            raise DimensionError("vocab index out of range")

    @property
    def d(self):
        return self.matrix.shape[1]

    @property
    def V(self):  # noqa: N802
        return self.matrix.shape[0]

    def index(self, word):
        """Row index for ``word``: exact match, then lowercase, else None (or UNK when trainable)."""
        i = self.vocab.get(word)
        if i is None:
            i = self.vocab.get(word.lower())
        if i is None and self.trainable:
            i = self.vocab.get(UNK)
        return i


def load_pretrained(path, expected_d):
    """Read a whitespace-separated ``word v1 ... vd`` text file into a frozen table.

    Duplicate words keep their first vector.  Lines with a wrong number of
    values raise :class:`DimensionError` carrying the 1-based line number.
    """
    vocab = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != expected_d:
                raise DimensionError(
                    f"expected {expected_d} values for {word!r}, got {len(values)}", line=lineno)
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=path) from exc
            if word in vocab:
                log.warning("duplicate word %r on line %d ignored", word, lineno)
                continue
            vocab[word] = len(rows)
            rows.append(vec)
    if not rows:
        raise ParseError("no vectors found", path=path)
    return EmbeddingTable(vocab, np.vstack(rows), trainable=False)


def compose_double(general, domain):
    """Concatenate two tables over the union vocabulary; missing halves are zero."""
    words = list(general.vocab)
    words += [w for w in domain.vocab if w not in general.vocab]
    matrix = np.zeros((len(words), general.d + domain.d))
    for k, w in enumerate(words):
        if w in general.vocab:
            matrix[k, :general.d] = general.matrix[general.vocab[w]]
        if w in domain.vocab:
            matrix[k, general.d:] = domain.matrix[domain.vocab[w]]
    return EmbeddingTable({w: k for k, w in enumerate(words)}, matrix, trainable=False)


def init_toy(vocab, d, seed):
    """Trainable table with row 0 reserved for unknown words; rows ~ U[-0.1, 0.1]."""
    if d < 1:
        raise ValueError("d must be >= 1")
    words = [UNK] + [w for w in dict.fromkeys(vocab) if w != UNK]
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.1, 0.1, size=(len(words), d))
    return EmbeddingTable({w: k for k, w in enumerate(words)}, matrix, trainable=True)


def token_ids(table, tokens):
    """Row indices for ``tokens``; -1 marks an out-of-vocabulary word in a frozen table."""
    out = []
    for w in tokens:
        i = table.index(w)
        out.append(-1 if i is None else i)
    return np.array(out, dtype=np.intp)


def lookup(table, tokens, matrix=None):
    """Embed ``tokens`` as an ``n x d`` tensor.

    ``matrix`` overrides ``table.matrix`` (a leaf tensor when gradients are
    wanted).  Frozen tables map unknown words to zero rows.
    """
    if hasattr(tokens, "tokens"):
        tokens = tokens.tokens
    ids = token_ids(table, tokens)
    if matrix is None:
        matrix = table.matrix
    if table.trainable:
        return ad.take(matrix, ids)
    data = np.asarray(ad.as_tensor(matrix).data)
    out = np.zeros((len(ids), data.shape[1]), dtype=data.dtype)
    known = ids >= 0
    out[known] = data[ids[known]]
    return ad.Tensor(out)
