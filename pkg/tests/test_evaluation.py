import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_store
from dgrec.config import ModelConfig
from dgrec.encoder import SessionContext
from dgrec.evaluation import (evaluate, evaluate_static, ndcg, popularity_baseline, rank_items,
                              ranks_from_scores, recall_at_k, synth_social_data, variance_report)
from dgrec.evaluation.attention import friend_weights, histogram
from dgrec.ingest import Session, SessionStore
from dgrec.model import DGRec, make_batch
from dgrec.toy import toy_instance


# -- ranking ---------------------------------------------------------------------

def test_rank_unique_max():
    assert rank_items([0.1, 0.7, 0.2], 1).rank == 1


def test_rank_uniform_is_pessimistic():
    assert rank_items(np.full(100, 0.01), 42).rank == 100


def test_rank_example():
    r = rank_items([0.5, 0.3, 0.2], 1, k=2)
    assert r.rank == 2 and r.top_k == (0, 1)


def test_rank_out_of_vocab():
    with pytest.raises(IndexError):
        rank_items([0.5, 0.5], 2)


def test_recall_examples():
    assert recall_at_k([1, 1, 1]) == 1.0
    assert recall_at_k([5, 25], 20) == 0.5
    with pytest.raises(ValueError):
        recall_at_k([])


def test_ndcg_examples():
    assert ndcg([1]) == 1.0
    assert ndcg([3]) == 0.5
    assert ndcg([1, 3]) == 0.75
    with pytest.raises(ValueError):
        ndcg([])


def brute_force(scores, targets, k):
    ranks = []
    for row, t in zip(scores, targets):
        ranks.append(sum(1 for j in range(len(row)) if row[j] >= row[t]))
    hits = sum(1 for r in ranks if r <= k)
    return ranks, hits / len(ranks), math.fsum(1 / math.log2(1 + r) for r in ranks) / len(ranks)


@given(st.integers(1, 50), st.integers(1, 40), st.integers(1, 25), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_metrics_match_brute_force(P, V, k, seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, 5, size=(P, V)).astype(float)  # coarse values force ties
    targets = rng.integers(0, V, size=P)
    ranks, rec, nd = brute_force(scores.tolist(), targets.tolist(), k)
    got = ranks_from_scores(scores, targets)
    assert got.tolist() == ranks
    assert recall_at_k(got, k) == rec and ndcg(got) == nd


@given(st.lists(st.integers(1, 100), min_size=1, max_size=20), st.lists(st.integers(0, 5), min_size=20, max_size=20))
@settings(max_examples=60, deadline=None)
def test_metrics_monotone_in_ranks(ranks, bumps):
    worse = [r + b for r, b in zip(ranks, bumps)]
    assert recall_at_k(worse) <= recall_at_k(ranks)
    assert 0 < ndcg(worse) <= ndcg(ranks) <= 1


# -- evaluate ----------------------------------------------------------------------

def constant_hidden_model(n_items: int, n_users: int, H: int = 3) -> DGRec:
    """self_only model whose hidden state is the same positive vector at every step."""
    model = DGRec(ModelConfig(hidden=H, embed=H, mode="self_only", dtype="float64"), n_items, n_users)
    for W in model.lstm.weights():
        W.data[:] = 0
    for name, value in (("x", 10.0), ("f", 0.0), ("o", 10.0), ("c", 10.0)):
        model.params[f"lstm/b_{name}"].data[:] = value
    model.W_2.data[:] = np.hstack([np.eye(H), np.zeros((H, H))])
    return model


def test_rigged_model_ranks_target_first():
    model = constant_hidden_model(n_items=6, n_users=3)
    model.Z.data[:] = 0
    model.Z.data[2] = 1.0
    store = make_store({u: [[1, 2], [4, 2, 2]] for u in range(3)})
    res = evaluate(model, store, SessionContext(store), None)
    assert (res.recall, res.ndcg) == (1.0, 1.0)


def test_random_ranking_recall_near_k_over_vocab():
    V, n = 1000, 4000
    model = constant_hidden_model(n_items=V, n_users=1)
    model.Z.data[:] = np.random.default_rng(0).normal(size=model.Z.shape)
    targets = np.random.default_rng(1).integers(0, V, size=n)
    store = SessionStore({0: [Session(0, t + 1, t, (0, int(x))) for t, x in enumerate(targets)]})
    res = evaluate(model, store, SessionContext(store), None)
    p = 20 / V
    assert abs(res.recall - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_evaluate_matches_per_position_oracle():
    toy = toy_instance(seed=3)
    store = toy.store
    res = evaluate(toy.model, store, toy.context, toy.graph)
    ranks = []
    for s in sorted(store, key=lambda s: (s.user, s.time_index)):
        for n in range(1, len(s)):
            prefix = Session(s.user, s.time_index, s.start, s.items[: n + 1])
            out = toy.model.forward(make_batch([prefix], toy.context, toy.graph, toy.model.config))
            row = out.logits.data[-1].tolist()
            ranks.append(sum(1 for v in row if v >= row[s.items[n]]))
    assert len(ranks) <= 50
    assert sorted(res.ranks.tolist()) == sorted(ranks)
    rec = sum(1 for r in ranks if r <= 20) / len(ranks)
    assert res.recall == rec
    assert res.ndcg == math.fsum(1 / math.log2(1 + r) for r in ranks) / len(ranks)


def test_evaluate_is_repeatable():
    toy = toy_instance(seed=1)
    a = evaluate(toy.model, toy.store, toy.context, toy.graph)
    b = evaluate(toy.model, toy.store, toy.context, toy.graph)
    assert np.array_equal(a.ranks, b.ranks) and a.loss == b.loss


# -- popularity ------------------------------------------------------------------

def test_popularity_proportional_to_counts():
    store = make_store({0: [[0, 0, 1], [0]]})
    p = popularity_baseline(store, 3)
    assert np.array_equal(p, [0.75, 0.25, 0.0])


def test_popularity_top_item_everywhere():
    train = make_store({0: [[5, 5, 1]], 1: [[5, 2]]})
    test = make_store({0: [[1, 5, 5]], 1: [[2, 5]]})
    res = evaluate_static(popularity_baseline(train, 8), test)
    assert res.recall == 1.0


def test_popularity_empty_store():
    with pytest.raises(ValueError):
        popularity_baseline(SessionStore(), 3)


# -- attention variance -----------------------------------------------------------

def rows_for(weights_by_session, user=0, friend=7):
    return [(user, s, step, 1, friend, w) for s, ws in weights_by_session.items() for step, w in enumerate(ws, 1)]


def test_constant_trace_has_zero_intra_variance():
    rep = variance_report(rows_for({1: [0.3, 0.3, 0.3]}))
    assert rep.intra[(0, 7)] == [0.0]


def test_single_session_has_no_inter_variance():
    rep = variance_report(rows_for({1: [0.1, 0.3]}))
    assert (0, 7) not in rep.inter


def test_inter_variance_example():
    rep = variance_report(rows_for({1: [0.1, 0.3], 2: [0.4, 0.4]}))
    assert rep.inter[(0, 7)] == pytest.approx(0.01, abs=1e-15)


def test_self_weights_excluded():
    rows = rows_for({1: [0.5, 0.1]}, user=0, friend=0)
    assert variance_report(rows).intra == {}


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_variances_nonnegative_and_binned(ws, n_sessions):
    sessions = {s: ws[s::n_sessions] for s in range(n_sessions) if ws[s::n_sessions]}
    rep = variance_report(rows_for(sessions))
    assert all(v >= 0 for vs in rep.intra.values() for v in vs)
    assert all(v >= 0 for v in rep.inter.values())
    hist = histogram(rep)
    assert len(hist) == 20
    assert sum(h[2] for h in hist) == sum(len(v) for v in rep.intra.values())
    assert sum(h[3] for h in hist) == len(rep.inter)


def test_duplicate_friends_are_summed():
    w = friend_weights(np.array([0.4, 0.2, 0.3, 0.1]), np.array([5, 5, 6]), self_id=1)
    assert w == {1: 0.4, 5: pytest.approx(0.5), 6: 0.1}


# -- synthetic data -----------------------------------------------------------------

def test_synth_is_deterministic():
    a = synth_social_data(30, 40, sessions_per_user=4, influence_prob=0.5, seed=9)
    b = synth_social_data(30, 40, sessions_per_user=4, influence_prob=0.5, seed=9)
    c = synth_social_data(30, 40, sessions_per_user=4, influence_prob=0.5, seed=10)
    assert a == b and a != c


def test_synth_full_influence_copies_friends():
    events, edges = synth_social_data(40, 60, sessions_per_user=3, influence_prob=1.0, seed=4)
    friends = {}
    for a, b in edges:
        friends.setdefault(a, set()).add(b)
        friends.setdefault(b, set()).add(a)
    by_week = {}
    for e in events:
        week = (e.timestamp - events[0].timestamp) // (7 * 86400)
        by_week.setdefault((e.user_id, week), set()).add(e.item_id)
    for (u, week), items in by_week.items():
        if week == 0 or u not in friends:
            continue
        pool = set().union(*(by_week.get((f, week - 1), set()) for f in friends[u]))
        if pool:
            assert items <= pool


def test_synth_mean_degree():
    _, edges = synth_social_data(200, 50, sessions_per_user=1, seed=0)
    assert 6.0 < 2 * len(edges) / 200 < 10.0
