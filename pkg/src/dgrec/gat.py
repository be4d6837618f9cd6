"""Dynamic feature graphs and stacked dot-product graph attention."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphstore import SampledNeighborhood, SocialGraph
from .rng import CounterRNG
from .tensorcore import ops
from .tensorcore.tensor import ShapeError, Tensor


def attention_weights(h_u: np.ndarray, neighbor_features: np.ndarray) -> np.ndarray:
    """Softmax of ``h_u . h_j`` over ``[h_u] + neighbors`` (self weight first)."""
    h_u = np.asarray(h_u, dtype=np.float64)
    nb = np.asarray(neighbor_features, dtype=np.float64).reshape(-1, h_u.shape[-1])
    keys = np.vstack([h_u[None, :], nb])
    logits = keys @ h_u
    e = np.exp(logits - logits.max())
    return e / e.sum()


def propagate_layer(h_u, neighbor_features, W: Tensor) -> Tensor:
    """``ReLU(W . sum_j alpha_j h_j)`` for a single node and its neighbors."""
    q = h_u if isinstance(h_u, Tensor) else Tensor(np.atleast_2d(np.asarray(h_u)))
    if q.ndim == 1:
        raise ShapeError("propagate_layer (pass a 1 x D row)", q.shape)
    cand = ops._t(neighbor_features)
    m = cand.shape[0]
    if m and cand.shape[1] != q.shape[1]:
        raise ShapeError("propagate_layer", q.shape, cand.shape)
    mix, _ = ops.attend(q, cand, np.arange(m, dtype=np.int64)[None, :])
    return ops.relu(ops.linear(mix, W))


@dataclass
class FeatureGraph:
    """Batched sampled trees, one per root.

    ``levels[h]`` holds the level-``h`` node features of every root stacked
    row-wise (level 0: one row per root, level ``h``: ``k_h`` rows per root).
    ``children[h][r, j]`` is the row in ``levels[h + 1]`` of the j-th child
    of row ``r`` of level ``h``, or -1.
    ``users[h]`` (optional) records which user each row stands for.
    """

    levels: list[Tensor]
    children: list[np.ndarray]
    users: list[np.ndarray] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.children)

    @property
    def n_roots(self) -> int:
        return self.levels[0].shape[0]

    def touched_nodes(self, root: int = 0) -> int:
        """Distinct tree rows reachable from one root through child links."""
        frontier = {root}
        total = 1
        for ch in self.children:
            nxt = {int(c) for r in frontier for c in ch[r] if c >= 0}
            total += len(nxt)
            frontier = nxt
        return total


@dataclass
class AttentionTrace:
    """Root attention per layer: ``alpha[l]`` is (roots, 1 + k_1), column 0
    is the self weight; ``friends`` (roots, k_1) names the other columns
    (-1 for absent friends)."""

    alpha: list[np.ndarray] = field(default_factory=list)
    friends: np.ndarray | None = None


def gat_forward(graph: FeatureGraph, weights: Sequence[Tensor], dropout: float = 0.0,
                train: bool = False, rng: CounterRNG | None = None):
    """Run ``len(weights)`` attention layers leaf-to-root over the trees.

    Layer ``l`` updates every level that still has a level below it, so the
    roots see ``L`` hops after ``L`` layers. Dropout hits each layer's input
    features. Returns the root features and the root attention trace.
    """
    L = len(weights)
    if graph.depth < L:
        raise ValueError(f"feature graph has depth {graph.depth}, need {L}")
    feats = list(graph.levels[: L + 1])
    trace = AttentionTrace(friends=graph.users[1] if len(graph.users) > 1 else None)
    for l, W in enumerate(weights):
        dropped = [ops.dropout(f, dropout, rng, train) for f in feats]
        new = []
        for h in range(L - l):
            mix, alpha = ops.attend(dropped[h], dropped[h + 1], graph.children[h])
            new.append(ops.relu(ops.linear(mix, W)))
            if h == 0:
                trace.alpha.append(alpha)
        feats = new
    return feats[0], trace


def tree_layout(hood: SampledNeighborhood, graph: SocialGraph, fanouts: Sequence[int]):
    """Per-level user lists and child tables for one sampled neighborhood.

    Levels always have ``k_h`` slots; a friendless root gets padding slots
    (user -1) that no parent links to.
    Returns ``(users, children)`` with ``users[0] = [root]``.
    """
    users = [np.array([hood.root], dtype=np.int64)]
    children = []
    friendful = bool(hood.layers and hood.layers[0])
    for h, k in enumerate(fanouts):
        if friendful:
            layer = np.asarray(hood.layers[h], dtype=np.int64)
            mask = np.asarray(hood.child_mask(graph, h), dtype=bool).reshape(len(users[h]), k)
        else:
            layer = np.full(k, -1, dtype=np.int64)
            mask = np.zeros((len(users[h]), k), dtype=bool)
        cols = np.broadcast_to(np.arange(k, dtype=np.int64), mask.shape)
        children.append(np.where(mask, cols, -1))
        users.append(layer)
    return users, children


def single_root_graph(hood: SampledNeighborhood, graph: SocialGraph, root_feature,
                      friend_features: dict, fanouts: Sequence[int]) -> FeatureGraph:
    """Feature graph for one root. ``friend_features[user]`` gives a 1 x D
    row (Tensor or array); the root reuses ``root_feature`` wherever it was
    resampled deeper in the tree."""
    users, children = tree_layout(hood, graph, fanouts)
    root = root_feature if isinstance(root_feature, Tensor) else Tensor(np.atleast_2d(root_feature))
    D = root.shape[1]
    levels = [root]
    for h in range(1, len(users)):
        rows = []
        for u in users[h]:
            if u == hood.root or u < 0:
                rows.append(root)
            else:
                f = friend_features[int(u)]
                rows.append(f if isinstance(f, Tensor) else Tensor(np.asarray(f).reshape(1, D)))
        levels.append(ops.concat(rows, axis=0))
    return FeatureGraph(levels, children, users)


def write_trace_rows(out, rows) -> None:
    """CSV rows ``target_user,session_id,step,layer,friend_id,weight``."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["target_user", "session_id", "step", "layer", "friend_id", "weight"])
    for r in rows:
        w.writerow(r)
