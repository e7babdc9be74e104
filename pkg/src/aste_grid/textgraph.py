"""Sentence text graphs and GraphSAGE message passing.

Each word is a node.  Edges are typed ``self`` (every node), ``neighbor``
(adjacent positions) and ``dependency`` (either direction of a parse arc).
A SAGE layer aggregates the deduplicated neighbor node set, which always
contains the node itself, and combines ``[h_v ; a_v]`` through an affine map
followed by ReLU.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoder import LstmCellParams, _cell, _data, lstm_step
from .errors import DimensionError, EmptyNeighborhood

SELF, NEIGHBOR, DEPENDENCY = "self", "neighbor", "dependency"
EDGE_TYPES = (SELF, NEIGHBOR, DEPENDENCY)
AGGREGATORS = ("lstm", "mean")


@dataclass(frozen=True)
class TextGraph:
    n: int
    neighbors: tuple  # per node: tuple of (node, edge_type)

    def nodes_of(self, v):
        """Distinct neighbor node ids of ``v`` (itself included), ascending."""
        return sorted({u for u, _ in self.neighbors[v]})

    def edges(self):
        for v, lst in enumerate(self.neighbors):
            for u, kind in lst:
                yield v, u, kind


def build_graph(sentence, deps):
    """Build the self-loop / neighbor / dependency graph of one sentence."""
    n = sentence.n if hasattr(sentence, "n") else int(sentence)
    lists = [[(i, SELF)] for i in range(n)]
    for i in range(n):
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                lists[i].append((j, NEIGHBOR))
    for arc in deps:
        h, d = arc.head, arc.dependent
        if not (0 <= h < n and 0 <= d < n):
            raise IndexError(f"arc ({h}, {d}) out of range for n={n}")
        if h == d:
            continue
        for a, b in ((h, d), (d, h)):
            if (b, DEPENDENCY) not in lists[a]:
                lists[a].append((b, DEPENDENCY))
    return TextGraph(n, tuple(tuple(lst) for lst in lists))


@dataclass
class SageLayerParams:
    aggregator: str
    W: object  # (d_out, 2 * d_in)
    b: object  # (d_out,)
    lstm: LstmCellParams | None = field(default=None)

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        d_out, two_in = np.shape(_data(self.W))
        if two_in % 2 or np.shape(_data(self.b)) != (d_out,):
            raise DimensionError("SAGE combine weights must be (d_out, 2*d_in) with bias (d_out,)")
        if self.aggregator == "lstm":
            if self.lstm is None:
                raise DimensionError("LSTM aggregator requires LSTM parameters")
            if self.lstm.d_in != self.d_in or self.lstm.hidden != self.d_in:
                raise DimensionError("aggregator LSTM must map d_in -> d_in")

    @property
    def d_in(self):
        return np.shape(_data(self.W))[1] // 2

    @property
    def d_out(self):
        return np.shape(_data(self.W))[0]

    @classmethod
    def init(cls, d_in, d_out, aggregator, rng):
        # He-uniform, suited to the ReLU that follows
        limit = np.sqrt(6.0 / (2 * d_in))
        W = rng.uniform(-limit, limit, size=(d_out, 2 * d_in))
        b = np.zeros(d_out)
        lstm = LstmCellParams.init(d_in, d_in, rng) if aggregator == "lstm" else None
        return cls(aggregator, W, b, lstm)


@dataclass
class GnnStack:
    layers: list

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("a GNN stack needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.d_out != nxt.d_in:
                raise DimensionError(f"layer dims do not chain: {prev.d_out} -> {nxt.d_in}")

    @property
    def L(self):  # noqa: N802
        return len(self.layers)

    @property
    def d_out(self):
        return self.layers[-1].d_out

    @classmethod
    def init(cls, d_in, d_out, num_layers, aggregator, rng):
        layers = []
        for k in range(num_layers):
            layers.append(SageLayerParams.init(d_in if k == 0 else d_out, d_out, aggregator, rng))
        return cls(layers)


def aggregate_mean(features):
    if len(features) == 0:
        raise EmptyNeighborhood("cannot aggregate an empty neighborhood")
    total = features[0]
    for f in features[1:]:
        total = total + f
    return total * (1.0 / len(features))


def aggregate_lstm(p, features, rng=None):
    """Final hidden state of an LSTM run over one random arrangement of ``features``.

    With ``rng=None`` the given order is kept (evaluation mode).
    """
    if len(features) == 0:
        raise EmptyNeighborhood("cannot aggregate an empty neighborhood")
    order = range(len(features)) if rng is None else rng.permutation(len(features))
    dtype = np.asarray(_data(features[0])).dtype
    h = ad.Tensor(np.zeros(p.hidden, dtype=dtype))
    c = ad.Tensor(np.zeros(p.hidden, dtype=dtype))
    for k in order:
        h, c = lstm_step(p, features[int(k)], h, c)
    return h


def neighbor_sequences(g, rng=None):
    """Per node, the deduplicated neighbor ids in aggregation order.

    Nodes are visited in index order and each draws one permutation from
    ``rng``, matching successive :func:`aggregate_lstm` calls.
    """
    seqs = []
    for v in range(g.n):
        nodes = g.nodes_of(v)
        if rng is not None:
            nodes = [nodes[int(k)] for k in rng.permutation(len(nodes))]
        seqs.append(nodes)
    return seqs


def _batched_lstm(p, H, seqs):
    n = len(seqs)
    K = max(len(s) for s in seqs)
    idx = np.zeros((n, K), dtype=np.intp)
    mask = np.zeros((n, K))
    for v, s in enumerate(seqs):
        idx[v, :len(s)] = s
        mask[v, :len(s)] = 1.0
    proj = ad.linear(H, p.W, p.b)
    hid = p.hidden
    h = ad.Tensor(np.zeros((n, hid), dtype=proj.data.dtype))
    c = ad.Tensor(np.zeros((n, hid), dtype=proj.data.dtype))
    for t in range(K):
        gates = ad.take(proj, idx[:, t]) + ad.linear(h, p.U)
        h_new, c_new = _cell(gates, c, hid)
        m = mask[:, t:t + 1]
        if m.all():
            h, c = h_new, c_new
        else:
            keep = 1.0 - m
            h = h_new * m + h * keep
            c = c_new * m + c * keep
    return h


def sage_layer(p, g, H, rng=None):
    """One GraphSAGE layer over graph ``g``; ``rng=None`` fixes neighbor order by index."""
    H = ad.as_tensor(H)
    if H.ndim != 2 or H.shape[0] != g.n:
        raise DimensionError(f"features shape {H.shape} does not match a graph of {g.n} nodes")
    if H.shape[1] != p.d_in:
        raise DimensionError(f"features have {H.shape[1]} dims, layer expects {p.d_in}")
    if p.aggregator == "mean":
        A = np.zeros((g.n, g.n), dtype=H.data.dtype)
        for v in range(g.n):
            nodes = g.nodes_of(v)
            A[v, nodes] = 1.0 / len(nodes)
        agg = ad.matmul(ad.Tensor(A), H)
    else:
        agg = _batched_lstm(p.lstm, H, neighbor_sequences(g, rng))
    return ad.relu(ad.linear(ad.concat([H, agg], axis=-1), p.W, p.b))


def gnn_encode(stack, g, H, rng=None):
    for layer in stack.layers:
        H = sage_layer(layer, g, H, rng)
    return H
