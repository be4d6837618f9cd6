"""Shared LSTM session encoder and friend representations."""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .ingest import Session, SessionStore
from .tensorcore import ops
from .tensorcore.tensor import ShapeError, Tensor

GATES = ("x", "f", "o", "c")
FRIEND_MODES = ("both", "short_only", "long_only")


@dataclass
class LSTMParams:
    """Gate matrices act on ``[h_prev; item]`` (hidden + embed columns)."""

    W_x: Tensor
    W_f: Tensor
    W_o: Tensor
    W_c: Tensor
    b_x: Tensor
    b_f: Tensor
    b_o: Tensor
    b_c: Tensor

    @property
    def hidden(self) -> int:
        return self.W_x.shape[0]

    @property
    def embed(self) -> int:
        return self.W_x.shape[1] - self.W_x.shape[0]

    def weights(self) -> list[Tensor]:
        return [self.W_x, self.W_f, self.W_o, self.W_c]

    def biases(self) -> list[Tensor]:
        return [self.b_x, self.b_f, self.b_o, self.b_c]

    def tensors(self) -> list[Tensor]:
        return self.weights() + self.biases()


def lstm_step(item_embed, h_prev, c_prev, p: LSTMParams):
    """One LSTM step written with primitive ops, rows are batch entries."""
    item_embed, h_prev, c_prev = (ops._t(a) for a in (item_embed, h_prev, c_prev))
    H = p.hidden
    if h_prev.shape[-1] != H or c_prev.shape != h_prev.shape or item_embed.shape[-1] != p.embed:
        raise ShapeError("lstm_step", item_embed.shape, h_prev.shape, c_prev.shape)
    z = ops.concat([h_prev, item_embed], axis=1)
    x = ops.sigmoid(ops.add(ops.linear(z, p.W_x), p.b_x))
    f = ops.sigmoid(ops.add(ops.linear(z, p.W_f), p.b_f))
    o = ops.sigmoid(ops.add(ops.linear(z, p.W_o), p.b_o))
    g = ops.tanh(ops.add(ops.linear(z, p.W_c), p.b_c))
    c = ops.add(ops.mul(f, c_prev), ops.mul(x, g))
    h = ops.mul(o, ops.tanh(c))
    return h, c


def encode_session(items, embedding: Tensor, p: LSTMParams) -> list[Tensor]:
    """States ``h_1 .. h_n`` (each 1 x H) from zero initial state."""
    if len(items) == 0:
        raise ValueError("cannot encode an empty session")
    zeros = np.zeros((1, p.hidden), dtype=embedding.dtype)
    h, c = Tensor(zeros), Tensor(zeros)
    out = []
    for item in items:
        h, c = lstm_step(ops.take_rows(embedding, [item]), h, c, p)
        out.append(h)
    return out


@dataclass
class BatchEncoding:
    states: Tensor  # (total steps, H)
    rows: list[np.ndarray]  # rows[s][n] -> row of states for sequence s, step n

    def row(self, seq: int, step: int) -> int:
        return int(self.rows[seq][step])

    def last_rows(self, seqs) -> np.ndarray:
        return np.array([self.rows[s][-1] for s in seqs], dtype=np.int64)


def encode_batch(sequences: list, embedding: Tensor, p: LSTMParams) -> BatchEncoding:
    """Encode many sequences at once with the fused LSTM cell.

    Sequences are sorted by length so step ``t`` runs on a prefix of the
    rows; all ``(sequence, step)`` states land in one table.
    """
    n = len(sequences)
    H = p.hidden
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    if n == 0:
        return BatchEncoding(Tensor(np.zeros((0, H), embedding.dtype)), [])
    if lengths.min() < 1:
        raise ValueError("cannot encode an empty session")
    order = np.argsort(-lengths, kind="stable")
    sorted_len = lengths[order]
    w = ops.concat(p.weights(), axis=0)
    b = ops.concat(p.biases(), axis=0)
    zeros = np.zeros((n, H), dtype=embedding.dtype)
    h, c = Tensor(zeros), Tensor(zeros)
    outputs = []
    table = np.full((n, int(sorted_len[0])), -1, dtype=np.int64)
    offset = 0
    for t in range(int(sorted_len[0])):
        a = int((sorted_len > t).sum())
        tokens = [sequences[s][t] for s in order[:a]]
        x = ops.take_rows(embedding, tokens)
        if a < h.shape[0]:
            h, c = ops.slice_rows(h, 0, a), ops.slice_rows(c, 0, a)
        pre = ops.add(ops.linear(ops.concat([h, x], axis=1), w), b)
        hc = ops.lstm_cell(pre, c)
        h, c = ops.slice_cols(hc, 0, H), ops.slice_cols(hc, H, 2 * H)
        outputs.append(h)
        table[order[:a], t] = offset + np.arange(a)
        offset += a
    rows = [table[s, :L] for s, L in enumerate(lengths)]
    return BatchEncoding(ops.concat(outputs, axis=0), rows)


class SessionContext:
    """Finds each user's most recent session that started before a time."""

    def __init__(self, store: SessionStore):
        self._sessions: dict[int, list[Session]] = {}
        self._starts: dict[int, list[int]] = {}
        for user, sessions in store.by_user.items():
            ordered = sorted(sessions, key=lambda s: s.start)
            self._sessions[user] = ordered
            self._starts[user] = [s.start for s in ordered]

    def prior(self, user: int, start: int) -> Session | None:
        starts = self._starts.get(user)
        if not starts:
            return None
        i = bisect.bisect_left(starts, start)
        return self._sessions[user][i - 1] if i > 0 else None

    def sessions(self, user: int) -> list[Session]:
        return self._sessions.get(user, [])


@dataclass
class FriendCache:
    """Per-batch memo of friend representations keyed by (friend, session).

    ``misses`` counts representations computed; ``hits`` counts later
    prediction positions that reuse one.
    """

    index: dict = field(default_factory=dict)
    misses: Counter = field(default_factory=Counter)
    hits: Counter = field(default_factory=Counter)

    def slot(self, key) -> int:
        idx = self.index.get(key)
        if idx is None:
            idx = self.index[key] = len(self.index)
        return idx

    def record_uses(self, key, positions: int) -> None:
        if positions <= 0:
            return
        if self.misses[key] == 0:
            self.misses[key] = 1
            positions -= 1
        self.hits[key] += positions

    def keys(self) -> list:
        return list(self.index)


def friend_short_term(friend: int, context: SessionContext, before: int,
                      embedding: Tensor, p: LSTMParams) -> Tensor:
    """Final LSTM state of the friend's latest session starting before
    ``before``; a zero row when there is none."""
    prior = context.prior(friend, before)
    if prior is None:
        return Tensor(np.zeros((1, p.hidden), dtype=embedding.dtype))
    return encode_session(prior.items, embedding, p)[-1]


def friend_long_term(k: int, user_embedding: Tensor) -> Tensor:
    n = user_embedding.shape[0]
    if not 0 <= k < n:
        raise IndexError(f"user {k} out of range for {n} users")
    return ops.take_rows(user_embedding, [k])


def combine_friend(s_short, s_long, W_1: Tensor, mode: str = "both") -> Tensor:
    """``ReLU(W_1 [short; long])``; ablation modes zero one slot."""
    s_short, s_long = ops._t(s_short), ops._t(s_long)
    if mode not in FRIEND_MODES:
        raise ValueError(f"unknown friend mode {mode!r}")
    if mode == "long_only":
        s_short = Tensor(np.zeros(s_short.shape, dtype=s_short.dtype))
    elif mode == "short_only":
        s_long = Tensor(np.zeros(s_long.shape, dtype=s_long.dtype))
    z = ops.concat([s_short, s_long], axis=1)
    if z.shape[1] != W_1.shape[1]:
        raise ShapeError("combine_friend", z.shape, W_1.shape)
    return ops.relu(ops.linear(z, W_1))
