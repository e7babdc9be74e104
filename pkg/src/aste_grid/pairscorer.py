"""Word-pair scoring over the upper-triangular grid.

Pair quantities are stored as 2-D arrays with one row per cell, in the
row-major order of :func:`upper_cells`: ``(0,0), (0,1), ..., (0,n-1), (1,1), ...``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .encoder import _data
from .errors import DimensionError
from .grid import NUM_TAGS, TagGrid

POOLED = 3 * NUM_TAGS  # z_i, z_j and z_ij appended to each pair representation


@lru_cache(maxsize=256)
def upper_cells(n):
    """Row and column indices of the ``n(n+1)/2`` upper-triangular cells."""
    iu, ju = np.triu_indices(n)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


@lru_cache(maxsize=256)
def cell_index(n):
    """``(n, n)`` map from an unordered pair ``{i, j}`` to its cell row."""
    iu, ju = upper_cells(n)
    idx = np.empty((n, n), dtype=np.intp)
    idx[iu, ju] = np.arange(len(iu))
    idx[ju, iu] = np.arange(len(iu))
    idx.setflags(write=False)
    return idx


def grid_size(num_cells):
    n = int(round((np.sqrt(8 * num_cells + 1) - 1) / 2))
    if n * (n + 1) // 2 != num_cells:
        raise DimensionError(f"{num_cells} cells is not a triangular number")
    return n


@dataclass
class ScorerParams:
    W_s: object  # (6, 2d')
    b_s: object
    W_g: object  # (h_g, 2d' + 18)
    b_g: object
    W_p: object  # (6, h_g)
    b_p: object

    def __post_init__(self):
        six, two_d = np.shape(_data(self.W_s))
        h_g, rt = np.shape(_data(self.W_g))
        ok = (six == NUM_TAGS and np.shape(_data(self.b_s)) == (NUM_TAGS,)
              and rt == two_d + POOLED and np.shape(_data(self.b_g)) == (h_g,)
              and np.shape(_data(self.W_p)) == (NUM_TAGS, h_g)
              and np.shape(_data(self.b_p)) == (NUM_TAGS,))
        if not ok:
            raise DimensionError("inconsistent scorer parameter shapes")

    @property
    def d_pair(self):
        return np.shape(_data(self.W_s))[1]

    @property
    def h_g(self):
        return np.shape(_data(self.W_g))[0]

    @classmethod
    def init(cls, d_node, h_g, rng):
        def glorot(rows, cols):
            limit = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-limit, limit, size=(rows, cols))

        d_pair = 2 * d_node
        return cls(glorot(NUM_TAGS, d_pair), np.zeros(NUM_TAGS),
                   glorot(h_g, d_pair + POOLED), np.zeros(h_g),
                   glorot(NUM_TAGS, h_g), np.zeros(NUM_TAGS))

    @classmethod
    def zeros(cls, d_node, h_g):
        d_pair = 2 * d_node
        return cls(np.zeros((NUM_TAGS, d_pair)), np.zeros(NUM_TAGS),
                   np.zeros((h_g, d_pair + POOLED)), np.zeros(h_g),
                   np.zeros((NUM_TAGS, h_g)), np.zeros(NUM_TAGS))


@dataclass
class PairTensors:
    """Per-cell values of one forward pass (plain arrays, one row per cell)."""

    n: int
    R: np.ndarray
    Z: np.ndarray
    Rt: np.ndarray
    G: np.ndarray
    P: np.ndarray

    def cell(self, name, i, j):
        if not 0 <= i <= j < self.n:
            raise IndexError(f"cell ({i}, {j}) is not upper-triangular for n={self.n}")
        return getattr(self, name)[cell_index(self.n)[i, j]]


def pair_repr(H):
    """``r_ij = [h_i ; h_j]`` for every upper cell."""
    H = ad.as_tensor(H)
    iu, ju = upper_cells(H.shape[0])
    return ad.concat([ad.take(H, iu), ad.take(H, ju)], axis=-1)


def initial_scores(p, R):
    """Affine tag logits per cell (no softmax)."""
    R = ad.as_tensor(R)
    if R.shape[-1] != p.d_pair:
        raise DimensionError(f"pair features have {R.shape[-1]} dims, scorer expects {p.d_pair}")
    return ad.linear(R, p.W_s, p.b_s)


def rowcol_maxpool(Z, i):
    """Elementwise max over the cells that pair word ``i`` with any word (cell (i,i) once)."""
    Z = ad.as_tensor(Z)
    n = grid_size(Z.shape[0])
    if not 0 <= i < n:
        raise IndexError(f"word index {i} out of range for n={n}")
    return ad.max(ad.take(Z, cell_index(n)[i]), axis=0)


def rowcol_maxpool_all(Z):
    """All ``n`` pooled vectors at once, shape ``(n, 6)``."""
    Z = ad.as_tensor(Z)
    n = grid_size(Z.shape[0])
    return ad.max(ad.take(Z, cell_index(n)), axis=1)


def inference_pass(p, R, Z, return_refined=False):
    """Refine every cell once with pooled logits and classify.

    Returns ``(G, P)``, plus the refined features when ``return_refined``.
    """
    R, Z = ad.as_tensor(R), ad.as_tensor(Z)
    if R.shape[0] != Z.shape[0]:
        raise DimensionError("R and Z must cover the same cells")
    if R.shape[-1] != p.d_pair or Z.shape[-1] != NUM_TAGS:
        raise DimensionError("pair features do not match the scorer")
    n = grid_size(Z.shape[0])
    iu, ju = upper_cells(n)
    pooled = rowcol_maxpool_all(Z)
    Rt = ad.concat([R, ad.take(pooled, iu), ad.take(pooled, ju), Z], axis=-1)
    G = ad.linear(Rt, p.W_g, p.b_g)
    P = ad.softmax(ad.linear(G, p.W_p, p.b_p), axis=-1)
    if return_refined:
        return G, P, Rt
    return G, P


def predict_grid(P):
    """Most probable tag per cell; exact ties go to the lowest tag index (N first)."""
    P = np.asarray(_data(P))
    n = grid_size(P.shape[0])
    iu, ju = upper_cells(n)
    tags = np.zeros((n, n), dtype=np.int8)
    tags[iu, ju] = np.argmax(P, axis=-1)
    return TagGrid(n, tags)


def gold_indices(gold):
    """Gold tag per cell in storage order."""
    iu, ju = upper_cells(gold.n)
    return gold.array[iu, ju].astype(np.intp)


def grid_loss(P, gold):
    """Summed negative log-likelihood of the gold tag over all upper cells."""
    P = ad.as_tensor(P)
    if P.shape[0] != gold.n * (gold.n + 1) // 2:
        raise DimensionError(f"{P.shape[0]} cells do not match a gold grid with n={gold.n}")
    picked = P[np.arange(P.shape[0]), gold_indices(gold)]
    return -ad.sum(ad.log(picked))
