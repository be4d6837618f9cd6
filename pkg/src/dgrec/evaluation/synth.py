"""Synthetic socially driven event logs for property and ablation tests."""

from __future__ import annotations

import csv

from ..ingest import DAY, Event
from ..rng import CounterRNG

# Monday 2020-01-06 00:00 UTC
EPOCH = 1578268800


def synth_social_data(num_users: int, num_items: int, sessions_per_user: int = 32,
                      influence_prob: float = 0.5, seed: int = 0, mean_degree: float = 8.0,
                      min_len: int = 2, max_len: int = 4, n_topics: int = 10,
                      topics_per_user: int | None = None):
    """Generate ``(events, edges)``.

    Friendships form an Erdos-Renyi graph with the given mean degree. Items
    are split into ``n_topics`` disjoint blocks and every user prefers
    ``topics_per_user`` of them (all of them by default, so user identity
    says nothing about a session's topic). User ``u`` has one session per
    week. Session ``t`` picks one of ``u``'s topics, then draws each item
    uniformly from the union of all friends' session ``t - 1`` items with
    probability ``influence_prob``, and uniformly from the topic otherwise.
    """
    rng = CounterRNG(seed, "synth")
    users = [f"u{i}" for i in range(num_users)]
    items = [f"i{j}" for j in range(num_items)]

    p = min(1.0, mean_degree / max(num_users - 1, 1))
    friends: list[list[int]] = [[] for _ in range(num_users)]
    edges = []
    for a in range(num_users):
        coins = rng.uniform(num_users - a - 1)
        for off, c in enumerate(coins):
            b = a + 1 + off
            if c < p:
                friends[a].append(b)
                friends[b].append(a)
                edges.append((users[a], users[b]))

    order = rng.permutation(num_items)
    n_topics = max(1, min(n_topics, num_items))
    topic_items = [order[k::n_topics] for k in range(n_topics)]
    k_pref = n_topics if topics_per_user is None else max(1, min(topics_per_user, n_topics))
    user_topics = [rng.sample_without_replacement(list(range(n_topics)), k_pref) for _ in range(num_users)]

    history: list[list[list[int]]] = [[] for _ in range(num_users)]
    for t in range(sessions_per_user):
        for u in range(num_users):
            pool = sorted({i for f in friends[u] for i in history[f][t - 1]}) if t > 0 else []
            length = min_len + rng.below(max_len - min_len + 1)
            own = topic_items[user_topics[u][rng.below(k_pref)]]
            seq = []
            for _ in range(length):
                if pool and rng.uniform(1)[0] < influence_prob:
                    seq.append(pool[rng.below(len(pool))])
                else:
                    seq.append(own[rng.below(len(own))])
            history[u].append(seq)

    events = []
    for u in range(num_users):
        for t, seq in enumerate(history[u]):
            base = EPOCH + t * 7 * DAY + (u % 24) * 3600
            for n, i in enumerate(seq):
                events.append(Event(users[u], items[i], base + 60 * n))
    return events, edges


def write_events_csv(out, events) -> None:
    w = csv.writer(out, lineterminator="\n")
    keyed = any(e.session_key is not None for e in events)
    w.writerow(["user_id", "item_id", "timestamp"] + (["session_key"] if keyed else []))
    for e in events:
        w.writerow([e.user_id, e.item_id, e.timestamp] + ([e.session_key or ""] if keyed else []))


def write_edges_csv(out, edges) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["user_id", "friend_id"])
    for a, b in edges:
        w.writerow([a, b])
