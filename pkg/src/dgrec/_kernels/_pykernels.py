"""Pure numpy kernels. Reference semantics for the compiled versions.

Gate layout for the LSTM kernels is ``[input, forget, output, candidate]``
along the last axis of ``pre`` (width ``4 * H``).

The attention kernels operate on a gather structure: ``query`` holds N
nodes, ``cand`` holds M candidate rows, and ``idx[n, j]`` names the row of
``cand`` used as the j-th neighbour of node n (``-1`` marks padding). Each
node always attends to itself first, so ``alpha`` has ``1 + C`` columns and
padded columns are exactly zero.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_cell_forward(pre, c_prev):
    H = c_prev.shape[1]
    acts = np.empty_like(pre)
    acts[:, : 3 * H] = _sigmoid(pre[:, : 3 * H])
    acts[:, 3 * H :] = np.tanh(pre[:, 3 * H :])
    x, f, o, g = acts[:, :H], acts[:, H : 2 * H], acts[:, 2 * H : 3 * H], acts[:, 3 * H :]
    c = f * c_prev + x * g
    h = o * np.tanh(c)
    return h, c, acts


def lstm_cell_backward(acts, c_prev, c, dh, dc):
    H = c_prev.shape[1]
    x, f, o, g = acts[:, :H], acts[:, H : 2 * H], acts[:, 2 * H : 3 * H], acts[:, 3 * H :]
    tc = np.tanh(c)
    dct = dc + dh * o * (1.0 - tc * tc)
    dpre = np.empty_like(acts)
    dpre[:, :H] = dct * g * x * (1.0 - x)
    dpre[:, H : 2 * H] = dct * c_prev * f * (1.0 - f)
    dpre[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
    dpre[:, 3 * H :] = dct * x * (1.0 - g * g)
    return dpre, dct * f


def _keys(query, cand, idx):
    if cand.shape[0] == 0:
        cand = np.zeros((1, query.shape[1]), dtype=query.dtype)
    safe = np.where(idx >= 0, idx, 0)
    keys = np.concatenate([query[:, None, :], cand[safe]], axis=1)
    valid = np.concatenate([np.ones((idx.shape[0], 1), bool), idx >= 0], axis=1)
    return keys, valid


def attend_forward(query, cand, idx):
    keys, valid = _keys(query, cand, idx)
    logits = np.einsum("nd,ncd->nc", query, keys)
    logits = np.where(valid, logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.where(valid, np.exp(logits), 0.0)
    alpha = (w / w.sum(axis=1, keepdims=True)).astype(query.dtype)
    mix = np.einsum("nc,ncd->nd", alpha, keys)
    return mix, alpha


def attend_backward(query, cand, idx, alpha, dmix):
    keys, valid = _keys(query, cand, idx)
    dalpha = np.einsum("nd,ncd->nc", dmix, keys)
    de = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    dkeys = de[:, :, None] * query[:, None, :] + alpha[:, :, None] * dmix[:, None, :]
    dquery = np.einsum("nc,ncd->nd", de, keys) + dkeys[:, 0]
    dcand = np.zeros_like(cand)
    sel = valid[:, 1:]
    np.add.at(dcand, idx[sel], dkeys[:, 1:][sel])
    return dquery, dcand


def xent_forward(logits, targets):
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    z = ex.sum(axis=1)
    probs = ex / z[:, None]
    loss = np.log(z) - shifted[np.arange(len(targets)), targets]
    return loss, probs


def xent_backward(probs, targets, dloss):
    d = probs * dloss[:, None]
    d[np.arange(len(targets)), targets] -= dloss
    return d


def scatter_add_rows(out, idx, src):
    np.add.at(out, idx, src)
    return out
