"""Undirected friendship graph and seeded fixed-fan-out neighbor sampling."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ingest import FormatError, Vocab, _text
from .rng import CounterRNG

log = logging.getLogger(__name__)


class SocialGraph:
    """Symmetric adjacency over dense user indices, without self-loops."""

    def __init__(self, n_users: int, edges: Iterable[tuple[int, int]] = ()):
        self.n_users = n_users
        sets: list[set[int]] = [set() for _ in range(n_users)]
        for a, b in edges:
            if a == b:
                continue
            sets[a].add(b)
            sets[b].add(a)
        self._adj: list[tuple[int, ...]] = [tuple(sorted(s)) for s in sets]
        self._sets = [frozenset(s) for s in sets]

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._adj[u]

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._sets[a]

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self._adj) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.n_users) for b in self._adj[a] if a < b]

    @property
    def avg_degree(self) -> float:
        return 2 * self.n_edges / self.n_users if self.n_users else 0.0


def load_edges(stream, users: Vocab) -> tuple[SocialGraph, int]:
    """Read ``user_id,friend_id`` rows; returns the graph and the drop count.

    A first row whose ids are both unknown and that looks like a header
    (non-numeric) is skipped rather than counted as dropped.
    """
    try:
        reader = csv.reader(_text(stream))
        rows = list(reader)
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable edges stream: {exc}") from exc
    edges = []
    dropped = 0
    for n, row in enumerate(rows):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            dropped += 1
            continue
        a, b = row[0].strip(), row[1].strip()
        ia, ib = users.get(a), users.get(b)
        if ia is None or ib is None:
            if n == 0 and not (a.isdigit() and b.isdigit()) and (ia is None and ib is None):
                continue
            dropped += 1
            continue
        edges.append((ia, ib))
    if dropped:
        log.info("dropped %d edges touching unknown users", dropped)
    return SocialGraph(len(users), edges), dropped


def write_edges(out, graph: SocialGraph, users: Vocab) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["user_id", "friend_id"])
    for a, b in graph.edges():
        w.writerow([users.id(a), users.id(b)])


def sample_neighbors(graph: SocialGraph, u: int, k: int, rng: CounterRNG) -> list[int]:
    """Uniform fixed-size sample of ``u``'s friends.

    Without replacement when the degree allows, otherwise with replacement
    up to ``k``; friendless users get an empty list.
    """
    if k < 1:
        raise ValueError("fan-out k must be >= 1")
    return _sample(list(graph.neighbors(u)), k, rng)


def _sample(pool: list[int], k: int, rng: CounterRNG) -> list[int]:
    if not pool:
        return []
    if len(pool) >= k:
        return rng.sample_without_replacement(pool, k)
    return rng.sample_with_replacement(pool, k)


@dataclass
class SampledNeighborhood:
    root: int
    fanouts: tuple[int, ...]
    layers: list[list[int]] = field(default_factory=list)

    def child_mask(self, graph: SocialGraph, level: int) -> list[list[bool]]:
        """Which samples of ``level + 1`` hang under each node of ``level``.

        The root owns every hop-1 sample; deeper nodes own the samples they
        are adjacent to in the graph.
        """
        below = self.layers[level] if level < len(self.layers) else []
        if level == 0:
            return [[True] * len(below)]
        above = self.layers[level - 1]
        return [[graph.has_edge(a, b) for b in below] for a in above]


def build_neighborhood(graph: SocialGraph, u: int, fanouts: Sequence[int],
                       rng: CounterRNG) -> SampledNeighborhood:
    """Sample hop-by-hop: hop ``l + 1`` is drawn from the union of the
    neighbors of the hop-``l`` samples (which may include the root)."""
    hood = SampledNeighborhood(u, tuple(fanouts))
    frontier = [u]
    for k in fanouts:
        pool = sorted({v for f in frontier for v in graph.neighbors(f)})
        frontier = _sample(pool, k, rng)
        hood.layers.append(frontier)
    return hood
