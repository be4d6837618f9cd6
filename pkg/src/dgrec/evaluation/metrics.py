from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RankResult:
    rank: int  # 1-based, ties counted against the true item
    top_k: tuple[int, ...]


def rank_items(probabilities, true_item: int, k: int = 20) -> RankResult:
    """Pessimistic rank of ``true_item``: every item scoring at least as
    high (other than itself) is ranked above it."""
    p = np.asarray(probabilities)
    if not 0 <= true_item < p.shape[0]:
        raise IndexError(f"item {true_item} outside vocabulary of {p.shape[0]}")
    rank = int((p >= p[true_item]).sum())
    top = np.argsort(-p, kind="stable")[:k]
    return RankResult(rank, tuple(int(i) for i in top))


def ranks_from_scores(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Vectorized pessimistic ranks for a (positions, items) score matrix."""
    true = scores[np.arange(len(targets)), targets]
    return (scores >= true[:, None]).sum(axis=1)


def recall_at_k(ranks, k: int = 20) -> float:
    r = np.asarray(ranks)
    if r.size == 0:
        raise ValueError("recall_at_k of an empty rank list")
    return float((r <= k).mean())


def ndcg(ranks) -> float:
    """Mean of ``1 / log2(1 + rank)``; no cutoff. Correctly rounded sum, so
    the result does not depend on position order."""
    r = np.asarray(ranks).reshape(-1)
    if r.size == 0:
        raise ValueError("ndcg of an empty rank list")
    return math.fsum(1.0 / math.log2(1.0 + float(x)) for x in r) / r.size
