"""LSTM cell and single-layer bidirectional LSTM encoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError

GATES = ("input", "forget", "output", "candidate")


@dataclass
class LstmCellParams:
    """Gate weights stacked in the order input, forget, output, candidate.

    ``W`` is (4*hidden, d_in), ``U`` is (4*hidden, hidden) and ``b`` is (4*hidden,).
    Entries may be numpy arrays or autodiff tensors.
    """

    W: object
    U: object
    b: object

    def __post_init__(self):
        four_h, d_in = np.shape(_data(self.W))
        if four_h % 4:
            raise DimensionError("gate rows must be a multiple of 4")
        h = four_h // 4
        if np.shape(_data(self.U)) != (four_h, h) or np.shape(_data(self.b)) != (four_h,):
            raise DimensionError(
                f"inconsistent LSTM shapes W{np.shape(_data(self.W))} "
                f"U{np.shape(_data(self.U))} b{np.shape(_data(self.b))}")

    @property
    def hidden(self):
        return np.shape(_data(self.U))[1]

    @property
    def d_in(self):
        return np.shape(_data(self.W))[1]

    def gate(self, name):
        """(W, U, b) slices for one gate, as numpy arrays."""
        k = GATES.index(name)
        h = self.hidden
        sl = slice(k * h, (k + 1) * h)
        return _data(self.W)[sl], _data(self.U)[sl], _data(self.b)[sl]

    def arrays(self):
        return {"W": self.W, "U": self.U, "b": self.b}

    @classmethod
    def init(cls, d_in, hidden, rng, scale=0.08, forget_bias=1.0):
        W = rng.uniform(-scale, scale, size=(4 * hidden, d_in))
        U = rng.uniform(-scale, scale, size=(4 * hidden, hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = forget_bias
        return cls(W, U, b)


@dataclass
class BiLstmParams:
    forward: LstmCellParams
    backward: LstmCellParams

    def __post_init__(self):
        if self.forward.hidden != self.backward.hidden or self.forward.d_in != self.backward.d_in:
            raise DimensionError("forward and backward cells must have equal sizes")

    @property
    def hidden(self):
        return self.forward.hidden

    @classmethod
    def init(cls, d_in, hidden, rng):
        return cls(LstmCellParams.init(d_in, hidden, rng), LstmCellParams.init(d_in, hidden, rng))


def _data(x):
    return x.data if isinstance(x, ad.Tensor) else x


def _cell(gates, c_prev, h):
    """Gate nonlinearities and state update from pre-activations (..., 4h)."""
    s = ad.sigmoid(gates[..., :3 * h])
    i, f, o = s[..., :h], s[..., h:2 * h], s[..., 2 * h:]
    g = ad.tanh(gates[..., 3 * h:])
    c = f * c_prev + i * g
    return o * ad.tanh(c), c


def lstm_step(p, x_t, h_prev, c_prev):
    """One LSTM step; returns ``(h, c)``."""
    h = p.hidden
    if np.shape(_data(x_t))[-1] != p.d_in:
        raise DimensionError(f"input has {np.shape(_data(x_t))[-1]} features, cell expects {p.d_in}")
    if np.shape(_data(h_prev))[-1] != h or np.shape(_data(c_prev))[-1] != h:
        raise DimensionError("state size does not match the cell")
    gates = ad.linear(x_t, p.W, p.b) + ad.linear(h_prev, p.U)
    return _cell(gates, ad.as_tensor(c_prev), h)


def run_lstm(p, X):
    """Unidirectional pass over the rows of X from zero state; returns the list of h_t."""
    h = p.hidden
    proj = ad.linear(X, p.W, p.b)
    dtype = proj.data.dtype
    h_t = ad.Tensor(np.zeros(h, dtype=dtype))
    c_t = ad.Tensor(np.zeros(h, dtype=dtype))
    out = []
    for t in range(len(proj)):
        gates = proj[t] + ad.linear(h_t, p.U)
        h_t, c_t = _cell(gates, c_t, h)
        out.append(h_t)
    return out


def bilstm_encode(p, X):
    """Contextual features ``n x 2*hidden``: forward state then backward state per token."""
    X = ad.as_tensor(X)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionError(f"expected an n x d matrix with n >= 1, got shape {X.shape}")
    if X.shape[1] != p.forward.d_in:
        raise DimensionError(f"input has {X.shape[1]} features, encoder expects {p.forward.d_in}")
    fwd = run_lstm(p.forward, X)
    bwd = run_lstm(p.backward, X[::-1])[::-1]
    return ad.concat([ad.stack(fwd), ad.stack(bwd)], axis=-1)
