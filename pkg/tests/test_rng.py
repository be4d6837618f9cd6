from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dgrec.rng import CounterRNG, _splitmix64, stream_id

M64 = (1 << 64) - 1


def philox4x64_block(counter, key):
    """Reference Philox4x64-10 written from the published round function."""
    c, k = list(counter), list(key)
    for _ in range(10):
        p0 = 0xD2E7470EE14C6C93 * c[0]
        p1 = 0xCA5A826395121157 * c[2]
        c = [(p1 >> 64) ^ c[1] ^ k[0], p1 & M64, (p0 >> 64) ^ c[3] ^ k[1], p0 & M64]
        k = [(k[0] + 0x9E3779B97F4A7C15) & M64, (k[1] + 0xBB67AE8584CAA73B) & M64]
    return c


def test_splitmix64_reference_value():
    # first output of SplitMix64 seeded with 0
    assert _splitmix64(0) == 0xE220A8397B1DCDAF


@given(st.integers(0, M64), st.text(max_size=6), st.integers(-5, 10**6))
@settings(max_examples=30, deadline=None)
def test_raw_stream_matches_reference_philox(seed, tag, n):
    rng = CounterRNG(seed, tag, n)
    key = [seed, stream_id(tag, n)]
    expected = philox4x64_block([1, 0, 0, 0], key) + philox4x64_block([2, 0, 0, 0], key)
    assert [int(v) for v in rng.raw(8)] == expected


def test_same_key_same_stream_and_tags_separate():
    a = CounterRNG(5, "sample", 3).raw(16)
    b = CounterRNG(5, "sample", 3).raw(16)
    c = CounterRNG(5, "sample", 4).raw(16)
    d = CounterRNG(6, "sample", 3).raw(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_stream_id_distinguishes_str_and_int_tags():
    assert stream_id("1") != stream_id(1)
    assert stream_id("ab") != stream_id("a", "b")


def test_below_and_uniform_are_derived_from_raw():
    raw = [int(v) for v in CounterRNG(9, "t").raw(4)]
    r = CounterRNG(9, "t")
    assert [r.below(10) for _ in range(2)] == [(x * 10) >> 64 for x in raw[:2]]
    u = r.uniform(2)
    assert np.array_equal(u, np.array([(x >> 11) * 2.0**-53 for x in raw[2:]]))


@given(st.integers(1, 60), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_permutation_is_a_permutation(n, seed):
    p = CounterRNG(seed, "perm").permutation(n)
    assert sorted(p) == list(range(n))


def test_below_is_roughly_uniform():
    r = CounterRNG(1, "chi")
    counts = Counter(r.below(6) for _ in range(60000))
    expected = 10000
    chi2 = sum((counts[i] - expected) ** 2 / expected for i in range(6))
    assert chi2 < 25  # 5 dof, p ~ 1e-4


def test_sample_without_replacement_has_no_duplicates():
    r = CounterRNG(0, "swr")
    for k in range(11):
        s = r.sample_without_replacement(list(range(10)), k)
        assert len(set(s)) == k


def test_sample_without_replacement_rejects_oversize():
    import pytest

    with pytest.raises(ValueError):
        CounterRNG(0).sample_without_replacement([1, 2], 3)
