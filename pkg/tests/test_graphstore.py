import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import csv_bytes
from dgrec.graphstore import SocialGraph, build_neighborhood, load_edges, sample_neighbors, write_edges
from dgrec.ingest import FormatError, Vocab
from dgrec.rng import CounterRNG


def vocab(*ids):
    return Vocab(ids)


def test_load_symmetrizes():
    g, dropped = load_edges(csv_bytes("a,b\n"), vocab("a", "b"))
    assert g.neighbors(0) == (1,) and g.neighbors(1) == (0,) and dropped == 0


def test_duplicate_directions_are_one_edge():
    g, _ = load_edges(csv_bytes("a,b\nb,a\n"), vocab("a", "b"))
    assert g.n_edges == 1


def test_unknown_user_dropped_and_counted():
    g, dropped = load_edges(csv_bytes("a,b\na,zz\n"), vocab("a", "b"))
    assert dropped == 1 and g.n_edges == 1


def test_header_row_is_skipped_not_dropped():
    g, dropped = load_edges(csv_bytes("user_id,friend_id\na,b\n"), vocab("a", "b"))
    assert dropped == 0 and g.n_edges == 1


def test_unreadable_stream():
    with pytest.raises(FormatError):
        load_edges(io.BytesIO(b"\xff\xfe\xfa,\x80\n"), vocab("a"))


def test_self_loops_not_stored():
    g = SocialGraph(2, [(0, 0), (0, 1)])
    assert g.neighbors(0) == (1,)


def test_write_edges_round_trip():
    users = vocab("a", "b", "c")
    g = SocialGraph(3, [(0, 1), (2, 1)])
    buf = io.StringIO()
    write_edges(buf, g, users)
    back, dropped = load_edges(io.StringIO(buf.getvalue()), users)
    assert back.edges() == g.edges() and dropped == 0


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 12))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30))
    return SocialGraph(n, pairs)


@given(graphs())
@settings(max_examples=60, deadline=None)
def test_graph_invariants(g):
    for u in range(g.n_users):
        nb = g.neighbors(u)
        assert list(nb) == sorted(set(nb))
        assert u not in nb
        assert all(g.has_edge(v, u) for v in nb)


def test_sample_exact_degree_is_permutation():
    g = SocialGraph(4, [(0, 1), (0, 2), (0, 3)])
    s = sample_neighbors(g, 0, 3, CounterRNG(0))
    assert sorted(s) == [1, 2, 3]


def test_sample_isolated_is_empty():
    assert sample_neighbors(SocialGraph(3), 0, 10, CounterRNG(0)) == []


def test_sample_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        sample_neighbors(SocialGraph(2, [(0, 1)]), 0, 0, CounterRNG(0))


def test_with_replacement_coverage_probability():
    # 2 friends, k = 4: both appear unless all 4 draws agree, P = 1 - 2 * (1/2)^4 = 7/8
    g = SocialGraph(3, [(0, 1), (0, 2)])
    n = 4000
    hits = sum(len(set(sample_neighbors(g, 0, 4, CounterRNG(seed, "cov")))) == 2 for seed in range(n))
    p = 7 / 8
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(hits / n - p) < 3 * sigma


@given(graphs(), st.integers(1, 6), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_sample_properties(g, k, seed):
    s = sample_neighbors(g, 0, k, CounterRNG(seed))
    nb = set(g.neighbors(0))
    assert set(s) <= nb
    if not nb:
        assert s == []
    else:
        assert len(s) == k
        if len(nb) >= k:
            assert len(set(s)) == k


def test_sampling_is_deterministic():
    g = SocialGraph(30, [(0, v) for v in range(1, 30)])
    a = sample_neighbors(g, 0, 10, CounterRNG(7, "x"))
    b = sample_neighbors(g, 0, 10, CounterRNG(7, "x"))
    assert a == b


def test_neighborhood_isolated():
    h = build_neighborhood(SocialGraph(2), 0, (10, 15), CounterRNG(0))
    assert h.layers == [[], []]


def test_neighborhood_star_center():
    g = SocialGraph(11, [(0, v) for v in range(1, 11)])
    h = build_neighborhood(g, 0, (10,), CounterRNG(0))
    assert sorted(h.layers[0]) == list(range(1, 11))


def test_neighborhood_chain_frontier():
    g = SocialGraph(3, [(0, 1), (1, 2)])
    seen = set()
    for seed in range(40):
        h = build_neighborhood(g, 0, (1, 1), CounterRNG(seed))
        assert h.layers[0] == [1]
        seen.add(h.layers[1][0])
    assert seen == {0, 2}


@given(graphs(), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_neighborhood_frontier_property(g, seed):
    h = build_neighborhood(g, 0, (3, 4), CounterRNG(seed))
    frontier = {0}
    for layer in h.layers:
        pool = {v for f in frontier for v in g.neighbors(f)}
        assert set(layer) <= pool
        frontier = set(layer)
