"""Events + edges -> encoded splits, vocabularies and graph."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

from .graphstore import SocialGraph, load_edges, write_edges
from .ingest import (SessionStore, SplitConfig, Vocab, build_vocabs, encode_store, read_store,
                     segment_sessions, split_holdout, write_store)

SPLITS = ("train", "valid", "test")


@dataclass
class Dataset:
    train: SessionStore
    valid: SessionStore
    test: SessionStore
    items: Vocab
    users: Vocab
    graph: SocialGraph
    dropped_sessions: int = 0
    dropped_edges: int = 0

    def split(self, name: str) -> SessionStore:
        return getattr(self, name)

    def stats(self) -> dict:
        stores = (self.train, self.valid, self.test)
        n_sessions = sum(len(s) for s in stores)
        n_events = sum(s.n_events for s in stores)
        n_users = len(self.users)
        return {
            "users": n_users,
            "items": len(self.items),
            "events": n_events,
            "sessions": n_sessions,
            "links": self.graph.n_edges,
            "avg_friends_per_user": self.graph.avg_degree,
            "avg_events_per_user": n_events / n_users if n_users else 0.0,
            "avg_session_length": n_events / n_sessions if n_sessions else 0.0,
            "train_sessions": len(self.train),
            "valid_sessions": len(self.valid),
            "test_sessions": len(self.test),
            "dropped_holdout_sessions": self.dropped_sessions,
            "dropped_edges": self.dropped_edges,
        }

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in SPLITS:
            with open(out / f"{name}.dgrs", "wb") as fh:
                write_store(fh, self.split(name), self.items, self.users)
        with open(out / "edges.csv", "w", encoding="utf-8", newline="") as fh:
            write_edges(fh, self.graph, self.users)


def build_dataset(events, edges_stream, split: SplitConfig, max_session_len: int = 20) -> Dataset:
    store = segment_sessions(events, split.interval, max_session_len)
    train_raw, valid_raw, test_raw = split_holdout(store, split)
    items, users = build_vocabs(train_raw)
    train, _ = encode_store(train_raw, items, users)
    valid, dv = encode_store(valid_raw, items, users)
    test, dt = encode_store(test_raw, items, users)
    if edges_stream is None:
        graph, dropped_edges = SocialGraph(len(users)), 0
    else:
        graph, dropped_edges = load_edges(edges_stream, users)
    return Dataset(train, valid, test, items, users, graph, dv + dt, dropped_edges)


def load_dataset(data_dir, need_graph: bool = True) -> Dataset:
    d = Path(data_dir)
    stores = {}
    items = users = None
    for name in SPLITS:
        with open(d / f"{name}.dgrs", "rb") as fh:
            stores[name], it, us = read_store(fh)
        if items is None:
            items, users = it, us
        elif it != items or us != users:
            raise ValueError(f"{name}.dgrs was written with different vocabularies")
    edges = d / "edges.csv"
    if edges.exists():
        with open(edges, "rb") as fh:
            graph, _ = load_edges(fh, users)
    elif need_graph:
        raise FileNotFoundError(f"{edges} missing (only self_only mode can run without a graph)")
    else:
        graph = SocialGraph(len(users))
    return Dataset(stores["train"], stores["valid"], stores["test"], items, users, graph)


def dataset_from_synth(events, edges, holdout_days: int = 7, seed: int = 0,
                       interval: str = "week", max_session_len: int = 20) -> Dataset:
    buf = io.StringIO()
    import csv

    w = csv.writer(buf, lineterminator="\n")
    for a, b in edges:
        w.writerow([a, b])
    buf.seek(0)
    return build_dataset(events, buf, SplitConfig(holdout_days, interval, seed), max_session_len)
