"""Attention inspection: per-position weight export and variance analysis."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..encoder import SessionContext
from ..graphstore import SocialGraph
from ..ingest import SessionStore
from ..model import DGRec, make_batch
from ..tensorcore.tensor import no_tape

N_BINS = 20


@dataclass
class VarianceReport:
    intra: dict = field(default_factory=dict)  # (user, friend) -> [variance per session]
    inter: dict = field(default_factory=dict)  # (user, friend) -> variance of session means
    histogram: list = field(default_factory=list)  # (lo, hi, intra_count, inter_count)

    @property
    def mean_intra(self) -> float:
        vals = [v for vs in self.intra.values() for v in vs]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_inter(self) -> float:
        vals = list(self.inter.values())
        return float(np.mean(vals)) if vals else float("nan")


def friend_weights(alpha_row: np.ndarray, friends_row: np.ndarray, self_id: int) -> dict[int, float]:
    """Collapse one attention row to per-user weights (duplicates summed)."""
    out: dict[int, float] = defaultdict(float)
    out[self_id] += float(alpha_row[0])
    for f, a in zip(friends_row, alpha_row[1:]):
        if f >= 0:
            out[int(f)] += float(a)
    return dict(out)


def eligible_users(store: SessionStore, graph: SocialGraph, min_sessions: int = 5,
                   min_friends: int = 5) -> list[int]:
    """Users with at least ``min_sessions`` scorable sessions and ``min_friends`` friends."""
    out = []
    for user, sessions in store.by_user.items():
        if sum(1 for s in sessions if len(s) >= 2) >= min_sessions and graph.degree(user) >= min_friends:
            out.append(user)
    return out


def collect_traces(model: DGRec, store: SessionStore, context: SessionContext, graph: SocialGraph,
                   users=None) -> list[tuple]:
    """Rows ``(user, session, step, layer, friend, weight)`` over all layers.

    ``step`` is the 1-based prefix length the prediction was made from.
    """
    if model.config.mode == "self_only":
        raise ValueError("self_only models have no attention to inspect")
    chosen = set(store.by_user) if users is None else set(users)
    rows = []
    with no_tape():
        for user in sorted(chosen):
            sessions = [s for s in store.by_user.get(user, []) if len(s) >= 2]
            if not sessions:
                continue
            batch = make_batch(sessions, context, graph, model.config, ("eval",))
            out = model.forward(batch, train=False)
            tr = out.trace
            for p in range(batch.n_positions):
                s = batch.sessions[batch.pos_session[p]]
                step = int(batch.pos_step[p]) + 1
                for layer, alpha in enumerate(tr.alpha, start=1):
                    for f, w in sorted(friend_weights(alpha[p], tr.friends[p], user).items()):
                        rows.append((user, s.time_index, step, layer, f, w))
    return rows


def variance_report(rows, layer: int | None = None, n_bins: int = N_BINS) -> VarianceReport:
    """Intra-session variance: population variance of a friend's weight over
    the positions of one session (sessions with >= 2 positions). Inter-session
    variance: population variance of the friend's per-session mean weight
    over sessions (users with >= 2 sessions). Self weights are excluded."""
    if layer is None:
        layer = max((r[3] for r in rows), default=1)
    series: dict = defaultdict(lambda: defaultdict(list))
    for user, sess, _step, lyr, friend, w in rows:
        if lyr != layer or friend == user:
            continue
        series[(user, friend)][sess].append(w)
    report = VarianceReport()
    for key, per_session in series.items():
        intra = [float(np.var(ws)) for ws in per_session.values() if len(ws) >= 2]
        if intra:
            report.intra[key] = intra
        if len(per_session) >= 2:
            means = [float(np.mean(ws)) for ws in per_session.values()]
            report.inter[key] = float(np.var(means))
    report.histogram = histogram(report, n_bins)
    return report


def histogram(report: VarianceReport, n_bins: int = N_BINS) -> list[tuple]:
    intra = np.array([v for vs in report.intra.values() for v in vs])
    inter = np.array(list(report.inter.values()))
    top = max(intra.max(initial=0.0), inter.max(initial=0.0))
    if top <= 0:
        top = 1.0
    edges = np.linspace(0.0, top, n_bins + 1)
    ci, _ = np.histogram(intra, bins=edges)
    ce, _ = np.histogram(inter, bins=edges)
    return [(float(edges[b]), float(edges[b + 1]), int(ci[b]), int(ce[b])) for b in range(n_bins)]


def attention_report(model: DGRec, store: SessionStore, context: SessionContext, graph: SocialGraph,
                     min_sessions: int = 5, min_friends: int = 5, users=None):
    """Traces for the selected users and the variance analysis of the final layer."""
    if users is None:
        users = eligible_users(store, graph, min_sessions, min_friends)
    rows = collect_traces(model, store, context, graph, users)
    return rows, variance_report(rows, layer=model.config.layers)


def write_histogram(out, report: VarianceReport) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "intra_count", "inter_count"])
    for lo, hi, a, b in report.histogram:
        w.writerow([repr(lo), repr(hi), a, b])
