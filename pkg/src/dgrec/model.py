"""The full recommender: parameters, minibatch assembly, forward pass, loss."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ModelConfig
from .encoder import FriendCache, LSTMParams, SessionContext, encode_batch
from .gat import AttentionTrace, FeatureGraph, gat_forward, tree_layout
from .graphstore import SocialGraph, build_neighborhood
from .ingest import Session
from .rng import CounterRNG
from .tensorcore import ops
from .tensorcore.tensor import ShapeError, Tensor, parameter

FRIEND_MODE = {"short_only": "short_only", "long_only": "long_only"}


def _glorot(rng: CounterRNG, shape, dtype) -> np.ndarray:
    a = np.sqrt(6.0 / (shape[0] + shape[1]))
    return ((rng.uniform(shape) * 2 - 1) * a).astype(dtype)


def _embed_init(rng: CounterRNG, shape, dtype) -> np.ndarray:
    return ((rng.uniform(shape) * 2 - 1) * 0.1).astype(dtype)


class DGRec:
    """All learnable arrays plus the forward computation.

    Parameter names double as checkpoint entry names.
    """

    def __init__(self, config: ModelConfig, n_items: int, n_users: int):
        self.config = config
        self.n_items = n_items
        self.n_users = n_users
        H, E, dt = config.hidden, config.embed, config.np_dtype
        rng = CounterRNG(config.seed, "init")
        p: dict[str, Tensor] = {}

        def add(name, arr):
            p[name] = parameter(arr, name)

        add("item_embedding", _embed_init(rng, (n_items, E), dt))
        add("user_embedding", _embed_init(rng, (n_users, E), dt))
        for g in "xfoc":
            add(f"lstm/W_{g}", _glorot(rng, (H, H + E), dt))
        for g in "xfoc":
            add(f"lstm/b_{g}", np.full(H, 1.0 if g == "f" else 0.0, dtype=dt))
        add("fusion/W_1", _glorot(rng, (H, H + E), dt))
        for l in range(1, config.layers + 1):
            add(f"gat/W_{l}", _glorot(rng, (H, H), dt))
        add("head/W_2", _glorot(rng, (H, 2 * H), dt))
        if not config.tie_embeddings:
            add("head/Z", _embed_init(rng, (n_items, H), dt))
        self.params = p
        self.lstm = LSTMParams(*(p[f"lstm/W_{g}"] for g in "xfoc"), *(p[f"lstm/b_{g}"] for g in "xfoc"))

    # -- parameter access --------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    @property
    def item_embedding(self) -> Tensor:
        return self.params["item_embedding"]

    @property
    def user_embedding(self) -> Tensor:
        return self.params["user_embedding"]

    @property
    def W_1(self) -> Tensor:
        return self.params["fusion/W_1"]

    @property
    def W_2(self) -> Tensor:
        return self.params["head/W_2"]

    @property
    def Z(self) -> Tensor:
        return self.params["item_embedding"] if self.config.tie_embeddings else self.params["head/Z"]

    @property
    def gat_weights(self) -> list[Tensor]:
        return [self.params[f"gat/W_{l}"] for l in range(1, self.config.layers + 1)]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise ShapeError(f"checkpoint entries differ (missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)})")
        for name, t in self.params.items():
            arr = arrays[name]
            if arr.shape != t.shape:
                raise ShapeError(f"checkpoint entry {name}", t.shape, arr.shape)
            t.data = np.array(arr, dtype=t.dtype)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    # -- forward -------------------------------------------------------------

    def forward(self, batch: "Batch", train: bool = False, rng: CounterRNG | None = None) -> "Forward":
        cfg = self.config
        H, dt = cfg.hidden, cfg.np_dtype
        enc = encode_batch(batch.sequences, self.item_embedding, self.lstm)
        h_n = ops.take_rows(enc.states, batch.position_rows(enc))
        P = h_n.shape[0]

        trace = None
        social = None
        if cfg.mode != "self_only":
            s_pairs = self._friend_features(batch, enc, dt)
            graph = batch.feature_graph(h_n, s_pairs)
            social, trace = gat_forward(graph, self.gat_weights, cfg.dropout, train, rng)

        hhat = final_representation(h_n, social, self.W_2, cfg.mode)
        logits = ops.linear(hhat, self.Z)
        loss = ops.softmax_xent(logits, batch.targets)
        return Forward(loss, logits, trace, P)

    def _friend_features(self, batch: "Batch", enc, dt) -> Tensor:
        H = self.config.hidden
        n_pairs = len(batch.pair_user)
        if n_pairs == 0:
            return Tensor(np.zeros((0, H), dtype=dt))
        fseq = batch.pair_seq
        last = enc.last_rows(range(batch.n_targets, len(batch.sequences)))
        # row F of the padded table is the zero state for friends without a prior session
        padded = ops.concat([ops.take_rows(enc.states, last), Tensor(np.zeros((1, H), dtype=dt))], axis=0)
        n_f = len(last)
        short = ops.take_rows(padded, np.where(fseq >= 0, fseq, n_f))
        long = ops.take_rows(self.user_embedding, batch.pair_user)
        mode = self.config.mode
        if mode == "long_only":
            short = Tensor(np.zeros(short.shape, dtype=dt))
        elif mode == "short_only":
            long = Tensor(np.zeros(long.shape, dtype=dt))
        return ops.relu(ops.linear(ops.concat([short, long], axis=1), self.W_1))


@dataclass
class Forward:
    loss_rows: Tensor  # (P,) negative log-likelihood per position
    logits: Tensor
    trace: AttentionTrace | None
    n_positions: int

    @property
    def mean_loss(self) -> float:
        return float(self.loss_rows.data.mean()) if self.n_positions else 0.0


def final_representation(h_n: Tensor, social: Tensor | None, W_2: Tensor, mode: str = "full") -> Tensor:
    """``W_2 [h_n; h_social]`` with the ablated slot zeroed."""
    H = h_n.shape[1]
    zeros = Tensor(np.zeros(h_n.shape, dtype=h_n.dtype))
    if social is None or mode == "self_only":
        social = zeros
    if mode == "social_only":
        h_n = zeros
    if social.shape != h_n.shape or W_2.shape[1] != 2 * H:
        raise ShapeError("final_representation", h_n.shape, social.shape, W_2.shape)
    return ops.linear(ops.concat([h_n, social], axis=1), W_2)


def score_and_softmax(hhat, Z) -> np.ndarray:
    """Full softmax over the item vocabulary, max-shifted."""
    hhat = hhat.data if isinstance(hhat, Tensor) else np.asarray(hhat)
    Z = Z.data if isinstance(Z, Tensor) else np.asarray(Z)
    logits = np.atleast_2d(hhat) @ Z.T
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


# -- minibatches -----------------------------------------------------------

@dataclass
class Batch:
    """Everything the forward pass needs for a group of target sessions.

    ``sequences`` starts with the target prefixes (``items[:-1]`` of each
    target session) followed by the unique friend sessions. Friend
    representations are computed once per (friend, friend session) pair
    and shared by every prediction position of every target that uses it.
    """

    sessions: list[Session]
    sequences: list[tuple]
    n_targets: int
    pos_session: np.ndarray  # (P,) target session of each position
    pos_step: np.ndarray  # (P,) prefix length - 1 of each position
    targets: np.ndarray  # (P,) next item
    pair_user: np.ndarray  # (pairs,) friend user
    pair_seq: np.ndarray  # (pairs,) index among friend sequences, -1 for none
    slot_src: list[np.ndarray] = field(default_factory=list)  # per level >= 1: (S, k) pair or -1 (root)
    children: list[np.ndarray] = field(default_factory=list)  # per level: (S, k_h, k_{h+1})
    slot_user: list[np.ndarray] = field(default_factory=list)  # per level >= 1: (S, k)
    cache: FriendCache = field(default_factory=FriendCache)

    @property
    def n_positions(self) -> int:
        return len(self.targets)

    def position_rows(self, enc) -> np.ndarray:
        return np.array([enc.rows[s][n] for s, n in zip(self.pos_session, self.pos_step)], dtype=np.int64)

    def feature_graph(self, h_n: Tensor, s_pairs: Tensor) -> FeatureGraph:
        """Expand per-session trees to one tree per prediction position.

        Node rows come from ``[h_n; s_pairs]``: friend slots point at their
        pair row, root-resampled and padding slots at the position's own h_n.
        """
        P = h_n.shape[0]
        ps = self.pos_session
        source = ops.concat([h_n, s_pairs], axis=0)
        levels = [h_n]
        users = [np.array([s.user for s in self.sessions], dtype=np.int64)[ps]]
        for src, su in zip(self.slot_src, self.slot_user):
            per_pos = src[ps]  # (P, k)
            k = per_pos.shape[1]
            rows = np.where(per_pos >= 0, P + per_pos, np.arange(P)[:, None])
            levels.append(ops.take_rows(source, rows.reshape(-1)))
            users.append(su[ps])
        children = []
        for ch in self.children:
            per_pos = ch[ps]  # (P, k_h, k_next)
            k_h, k_next = per_pos.shape[1], per_pos.shape[2]
            base = (np.arange(P) * k_next)[:, None, None]
            idx = np.where(per_pos >= 0, per_pos + base, -1)
            children.append(idx.reshape(P * k_h, k_next))
        return FeatureGraph(levels, children, users)


def make_batch(sessions: Sequence[Session], context: SessionContext, graph: SocialGraph | None,
               config: ModelConfig, sample_tag=("eval",)) -> Batch:
    """Assemble a minibatch from target sessions of length >= 2.

    Neighborhoods are sampled per target session with a stream keyed by
    ``(seed, sample_tag, user, time_index)`` so results do not depend on
    batch composition.
    """
    sessions = [s for s in sessions if len(s) >= 2]
    sequences = [tuple(s.items[:-1]) for s in sessions]
    pos_session, pos_step, targets = [], [], []
    for i, s in enumerate(sessions):
        n = len(s) - 1
        pos_session.extend([i] * n)
        pos_step.extend(range(n))
        targets.extend(s.items[1:])
    batch = Batch(
        sessions=list(sessions),
        sequences=sequences,
        n_targets=len(sessions),
        pos_session=np.asarray(pos_session, dtype=np.int64),
        pos_step=np.asarray(pos_step, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.int64),
        pair_user=np.zeros(0, dtype=np.int64),
        pair_seq=np.zeros(0, dtype=np.int64),
    )
    if config.mode == "self_only":
        return batch

    fanouts = config.fanouts
    S = len(sessions)
    slot_src = [np.full((S, k), -1, dtype=np.int64) for k in fanouts]
    slot_user = [np.full((S, k), -1, dtype=np.int64) for k in fanouts]
    children = []
    sizes = (1,) + tuple(fanouts)
    for h in range(len(fanouts)):
        children.append(np.full((S, sizes[h], sizes[h + 1]), -1, dtype=np.int64))

    cache = batch.cache
    pair_user, pair_seq = [], []
    friend_seq_index: dict[tuple, int] = {}
    for i, s in enumerate(sessions):
        n_pos = len(s) - 1
        if graph is None or graph.degree(s.user) == 0:
            continue
        rng = CounterRNG(config.seed, *sample_tag, s.user, s.time_index)
        hood = build_neighborhood(graph, s.user, fanouts, rng)
        users, ch = tree_layout(hood, graph, fanouts)
        for h in range(len(fanouts)):
            children[h][i] = ch[h]
        for h, layer in enumerate(users[1:]):
            slot_user[h][i] = layer
            for j, f in enumerate(layer):
                f = int(f)
                if f == s.user or f < 0:
                    continue
                prior = context.prior(f, s.start)
                key = (f, prior.time_index if prior is not None else None)
                pair = cache.slot(key)
                if pair == len(pair_user):
                    pair_user.append(f)
                    if prior is None:
                        pair_seq.append(-1)
                    else:
                        fk = (f, prior.time_index)
                        if fk not in friend_seq_index:
                            friend_seq_index[fk] = len(sequences) - S
                            sequences.append(tuple(prior.items))
                        pair_seq.append(friend_seq_index[fk])
                slot_src[h][i, j] = pair
                cache.record_uses(key, n_pos)
    batch.pair_user = np.asarray(pair_user, dtype=np.int64)
    batch.pair_seq = np.asarray(pair_seq, dtype=np.int64)
    batch.slot_src = slot_src
    batch.slot_user = slot_user
    batch.children = children
    return batch


def training_sessions(store) -> list[Session]:
    """Sessions that carry targets: second-or-later sessions of length >= 2."""
    return [s for s in store if s.time_index >= 2 and len(s) >= 2]


def session_loss(model: DGRec, session: Session, context: SessionContext,
                 graph: SocialGraph | None, train: bool = False, rng: CounterRNG | None = None,
                 sample_tag=("eval",)):
    """Summed and per-position negative log-likelihood of one session."""
    batch = make_batch([session], context, graph, model.config, sample_tag)
    if batch.n_positions == 0:
        raise ValueError("session of length 1 has no prediction targets")
    out = model.forward(batch, train=train, rng=rng)
    total = ops.sum_all(out.loss_rows)
    return total, out.mean_loss
