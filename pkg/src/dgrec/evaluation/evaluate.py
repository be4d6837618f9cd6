"""Next-item evaluation over held-out sessions, plus a popularity floor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encoder import SessionContext
from ..graphstore import SocialGraph
from ..ingest import SessionStore
from ..model import DGRec, make_batch
from ..tensorcore.tensor import no_tape
from .metrics import ndcg, ranks_from_scores, recall_at_k


@dataclass
class EvalResult:
    recall: float
    ndcg: float
    loss: float
    ranks: np.ndarray = field(repr=False)

    @property
    def n_positions(self) -> int:
        return len(self.ranks)


def eval_sessions(store: SessionStore) -> list:
    return [s for s in store if len(s) >= 2]


def evaluate(model: DGRec, store: SessionStore, context: SessionContext, graph: SocialGraph | None,
             k: int | None = None, batch_size: int | None = None) -> EvalResult:
    """Predict every next item of every session (prefix length >= 1).

    No dropout; neighborhoods come from the fixed evaluation stream, so
    repeated calls give identical results.
    """
    cfg = model.config
    k = k or cfg.eval_k
    batch_size = batch_size or cfg.batch
    sessions = eval_sessions(store)
    ranks, losses = [], []
    with no_tape():
        for i in range(0, len(sessions), batch_size):
            batch = make_batch(sessions[i:i + batch_size], context, graph, cfg, ("eval",))
            out = model.forward(batch, train=False)
            # softmax is monotone, so ranking logits avoids ties from underflow
            ranks.append(ranks_from_scores(out.logits.data, batch.targets))
            losses.append(out.loss_rows.data.astype(np.float64))
    if not ranks:
        return EvalResult(float("nan"), float("nan"), float("nan"), np.zeros(0, dtype=np.int64))
    r = np.concatenate(ranks)
    return EvalResult(recall_at_k(r, k), ndcg(r), float(np.concatenate(losses).mean()), r)


def popularity_baseline(train: SessionStore, n_items: int) -> np.ndarray:
    """Item probabilities proportional to training frequency."""
    counts = np.zeros(n_items, dtype=np.float64)
    for s in train:
        np.add.at(counts, np.asarray(s.items, dtype=np.int64), 1.0)
    total = counts.sum()
    if total == 0:
        raise ValueError("popularity baseline needs a non-empty training store")
    return counts / total


def evaluate_static(probs: np.ndarray, store: SessionStore, k: int = 20) -> EvalResult:
    """Score a fixed probability vector at every next-item position."""
    targets = np.array([i for s in eval_sessions(store) for i in s.items[1:]], dtype=np.int64)
    if targets.size == 0:
        return EvalResult(float("nan"), float("nan"), float("nan"), np.zeros(0, dtype=np.int64))
    scores = np.broadcast_to(probs, (len(targets), len(probs)))
    r = ranks_from_scores(scores, targets)
    with np.errstate(divide="ignore"):
        loss = float(-np.log(probs[targets]).mean())
    return EvalResult(recall_at_k(r, k), ndcg(r), loss, r)
