"""Differentiable operators.

Only what the recommender needs: 2-D matrices, row-vector bias broadcast,
row gathers, and three fused ops (LSTM cell, gather attention, softmax
cross-entropy) whose inner loops live in :mod:`dgrec._kernels`.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels as K
from ..rng import CounterRNG
from .tensor import ShapeError, Tensor, record


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    A, B = a.data, b.data
    return record(A @ B, "matmul", (a, b), lambda g: (g @ B.T, A.T @ g))


def linear(x, w) -> Tensor:
    """``x @ w.T``; ``w`` is stored (out, in) like the weight matrices."""
    x, w = _t(x), _t(w)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError("linear", x.shape, w.shape)
    X, W = x.data, w.data
    return record(X @ W.T, "linear", (x, w), lambda g: (g @ W, g.T @ X))


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may also be a row vector broadcast over ``a``."""
    a, b = _t(a), _t(b)
    if a.shape == b.shape:
        return record(a.data + b.data, "add", (a, b), lambda g: (g, g))
    if b.ndim == 1 and a.ndim == 2 and a.shape[1] == b.shape[0]:
        return record(a.data + b.data, "add", (a, b), lambda g: (g, g.sum(axis=0)))
    raise ShapeError("add", a.shape, b.shape)


def mul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.shape != b.shape:
        raise ShapeError("elementwise_mul", a.shape, b.shape)
    A, B = a.data, b.data
    return record(A * B, "mul", (a, b), lambda g: (g * B, g * A))


elementwise_mul = mul


def scale(a, c: float) -> Tensor:
    a = _t(a)
    return record(a.data * c, "scale", (a,), lambda g: (g * c,))


def neg(a) -> Tensor:
    a = _t(a)
    return record(-a.data, "neg", (a,), lambda g: (-g,))


def concat(tensors, axis: int = -1) -> Tensor:
    ts = tuple(_t(x) for x in tensors)
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in ts)) from None
    ax = axis % ts[0].ndim
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return record(out, "concat", ts, lambda g: tuple(np.split(g, bounds, axis=ax)))


def slice_rows(x, start: int, stop: int) -> Tensor:
    x = _t(x)
    n = x.shape[0]

    def back(g):
        full = np.zeros_like(x.data)
        full[start:stop] = g
        return (full,)

    if not 0 <= start <= stop <= n:
        raise ShapeError(f"slice_rows[{start}:{stop}]", x.shape)
    return record(x.data[start:stop], "slice_rows", (x,), back)


slice_row = slice_rows


def slice_cols(x, start: int, stop: int) -> Tensor:
    x = _t(x)

    def back(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    if x.ndim != 2 or not 0 <= start <= stop <= x.shape[1]:
        raise ShapeError(f"slice_cols[{start}:{stop}]", x.shape)
    return record(x.data[:, start:stop], "slice_cols", (x,), back)


def take_rows(table, idx) -> Tensor:
    """Row gather ``table[idx]``; the backward pass scatter-adds."""
    table = _t(table)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("take_rows (index must be 1-D)", idx.shape)
    n = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"take_rows: index out of range for {n} rows")

    def back(g):
        full = np.zeros_like(table.data)
        K.scatter_add_rows(full, idx, g)
        return (full,)

    return record(table.data[idx], "take_rows", (table,), back)


embedding_lookup = take_rows


def sigmoid(x) -> Tensor:
    x = _t(x)
    y = K.py._sigmoid(np.asarray(x.data, dtype=x.dtype))
    return record(y, "sigmoid", (x,), lambda g: (g * y * (1 - y),))


def tanh(x) -> Tensor:
    x = _t(x)
    y = np.tanh(x.data)
    return record(y, "tanh", (x,), lambda g: (g * (1 - y * y),))


def relu(x) -> Tensor:
    x = _t(x)
    on = x.data > 0
    return record(np.where(on, x.data, 0).astype(x.dtype), "relu", (x,), lambda g: (g * on,))


def log(x) -> Tensor:
    x = _t(x)
    X = x.data
    return record(np.log(X), "log", (x,), lambda g: (g / X,))


def softmax_rows(x) -> Tensor:
    x = _t(x)
    if x.ndim != 2:
        raise ShapeError("softmax_rows", x.shape)
    e = np.exp(x.data - x.data.max(axis=1, keepdims=True))
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return record(y, "softmax_rows", (x,), back)


def sum_all(x) -> Tensor:
    x = _t(x)
    return record(np.asarray(x.data.sum()), "sum", (x,), lambda g: (np.full_like(x.data, g),))


def mean_all(x) -> Tensor:
    x = _t(x)
    n = x.data.size
    return record(np.asarray(x.data.mean()), "mean", (x,), lambda g: (np.full_like(x.data, g / n),))


def dropout(x, rate: float, rng: CounterRNG | None, train: bool) -> Tensor:
    """Inverted dropout; identity when not training or when rate is 0."""
    x = _t(x)
    if not train or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    keep = rng.uniform(x.shape) >= rate
    m = (keep / (1.0 - rate)).astype(x.dtype)
    return record(x.data * m, "dropout", (x,), lambda g: (g * m,))


def weighted_sum(weights, vectors) -> Tensor:
    """``out[b] = sum_j weights[b, j] * vectors[b, j]`` for (B, m) and (B, m, d)."""
    w, v = _t(weights), _t(vectors)
    if w.ndim != 2 or v.ndim != 3 or w.shape != v.shape[:2]:
        raise ShapeError("weighted_sum", w.shape, v.shape)
    W, V = w.data, v.data
    out = np.einsum("bm,bmd->bd", W, V)
    return record(out, "weighted_sum", (w, v),
                  lambda g: (np.einsum("bd,bmd->bm", g, V), W[:, :, None] * g[:, None, :]))


# -- fused ops -------------------------------------------------------------

def lstm_cell(pre, c_prev) -> Tensor:
    """Gate nonlinearities and state update of an LSTM step.

    ``pre`` is (n, 4H) in ``[input, forget, output, candidate]`` order.
    Returns (n, 2H) holding ``[h | c]``.
    """
    pre, c_prev = _t(pre), _t(c_prev)
    n, H = c_prev.shape
    if pre.shape != (n, 4 * H):
        raise ShapeError("lstm_cell", pre.shape, c_prev.shape)
    h, c, acts = K.lstm_cell_forward(pre.data, c_prev.data)
    cp = c_prev.data

    def back(g):
        dpre, dcp = K.lstm_cell_backward(acts, cp, c, np.ascontiguousarray(g[:, :H]),
                                         np.ascontiguousarray(g[:, H:]))
        return dpre, dcp

    return record(np.concatenate([h, c], axis=1), "lstm_cell", (pre, c_prev), back)


def attend(query, cand, idx):
    """Dot-product attention of each query row over itself and its gathered
    candidates. Returns the mixed features (differentiable) and the weight
    matrix (plain array, self weight in column 0)."""
    query, cand = _t(query), _t(cand)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if (query.ndim != 2 or cand.ndim != 2 or idx.ndim != 2 or idx.shape[0] != query.shape[0]
            or (cand.shape[0] and cand.shape[1] != query.shape[1])):
        raise ShapeError("attend", query.shape, cand.shape, idx.shape)
    mix, alpha = K.attend_forward(query.data, cand.data, idx)
    Q, C = query.data, cand.data

    def back(g):
        return K.attend_backward(Q, C, idx, alpha, np.ascontiguousarray(g))

    return record(mix, "attend", (query, cand), back), alpha


def softmax_xent(logits, targets) -> Tensor:
    """Per-row negative log-likelihood of ``targets`` under softmax(logits)."""
    logits = _t(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError("softmax_xent", logits.shape, targets.shape)
    loss, probs = K.xent_forward(logits.data, targets)
    return record(loss, "softmax_xent", (logits,), lambda g: (K.xent_backward(probs, targets, g),))
