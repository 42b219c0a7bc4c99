import json
import math
import random

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadetest.corpus import DemoPool, PrefixDemo
from cascadetest.errors import DimensionError, EmbeddingBackendError, EmptyPoolError, ZeroNormError
from cascadetest.query import Query
from cascadetest.selection import (
    HashEmbedder,
    PoolIndex,
    RemoteEmbedder,
    SelectionStrategy,
    Strategy,
    cluster,
    cosine,
    embed,
    make_embedder,
    query_text,
    select_demos,
    tokenize,
)

from helpers import query_for, random_prefix_pool, random_query

vectors = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: math.sqrt(sum(x * x for x in v)) > 1e-3)


# -- embed ----------------------------------------------------------------------


def test_tokenize_splits_camel_case():
    assert tokenize("parseJSONValue") == ["parsejsonvalue", "parse", "json", "value"]
    assert tokenize("a.b(12)") == ["a", "b", "12"]


def test_embed_is_deterministic_and_normalised():
    a, b = embed("Counter counter = new Counter(3);"), embed("Counter counter = new Counter(3);")
    assert np.array_equal(a, b)
    assert a.shape == (512,)
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_embed_empty_text():
    with pytest.raises(EmbeddingBackendError, match="EmptyInput"):
        embed("")


def test_disjoint_tokens_are_orthogonal():
    e = HashEmbedder()
    u, v = e.embed("alpha beta"), e.embed("gamma delta")
    # hand check: the four tokens land in four different buckets
    assert len({int(np.flatnonzero(e.embed(t))[0]) for t in ["alpha", "beta", "gamma", "delta"]}) == 4
    assert cosine(u, v) == 0.0


def test_remote_embedder_protocol():
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        return httpx.Response(200, json={"vector": [3.0, 4.0]})

    emb = RemoteEmbedder("http://embed.local/v1", client=httpx.Client(transport=httpx.MockTransport(handler)))
    assert list(emb.embed("hello")) == [3.0, 4.0]
    assert seen == [{"input": "hello"}]


def test_remote_embedder_failure():
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(503)))
    with pytest.raises(EmbeddingBackendError):
        RemoteEmbedder("http://embed.local/v1", client=client).embed("hello")


def test_make_embedder():
    assert isinstance(make_embedder({"backend": "local-hash", "dim": 64}), HashEmbedder)
    with pytest.raises(EmbeddingBackendError):
        make_embedder({"backend": "remote"})
    with pytest.raises(EmbeddingBackendError):
        make_embedder({"backend": "nope"})


# -- cosine ------------------------------------------------------------------------


def test_cosine_examples():
    assert cosine([2.0, 1.0], [2.0, 1.0]) == pytest.approx(1.0)
    assert cosine([1.0, 0.0], [0.0, 5.0]) == 0.0
    assert abs(cosine([1.0, 0.0], [1.0, 1.0]) - 1 / math.sqrt(2)) < 1e-9
    with pytest.raises(DimensionError):
        cosine([1.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ZeroNormError):
        cosine([0.0, 0.0], [1.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, st.floats(0.01, 1000))
def test_cosine_symmetry_and_scaling(u, v, a):
    assert abs(cosine(u, v) - cosine(v, u)) <= 1e-12
    assert abs(cosine([a * x for x in u], v) - cosine(u, v)) <= 1e-9
    assert -1.0 <= cosine(u, v) <= 1.0


# -- cluster ------------------------------------------------------------------------------


def test_cluster_separated_points():
    pts = np.eye(5) * 10
    labels = cluster(pts, 5, seed=1)
    assert sorted(labels) == [0, 1, 2, 3, 4]


def test_cluster_clamps_k():
    labels = cluster(np.eye(3), 5, seed=1)
    assert len(set(labels)) == 3
    assert len(set(cluster(np.ones((4, 2)), 3, seed=0))) == 1


def test_cluster_is_seed_stable():
    pts = np.random.default_rng(5).normal(size=(40, 8))
    assert np.array_equal(cluster(pts, 5, 99), cluster(pts, 5, 99))


def test_cluster_groups_obvious_blobs():
    rng = np.random.default_rng(0)
    blobs = np.vstack([rng.normal(c, 0.01, size=(6, 2)) for c in ([0, 0], [5, 5], [0, 5])])
    labels = cluster(blobs, 3, seed=3)
    for i in range(3):
        assert len(set(labels[6 * i:6 * i + 6])) == 1
    assert len(set(labels)) == 3


# -- select_demos ---------------------------------------------------------------------------


def strategies(seed=0):
    return {s: SelectionStrategy(s, seed) for s in Strategy}


def test_ascending_descending_are_reverses():
    r = random.Random(1)
    pool = random_prefix_pool(r, 30)
    q = random_query(r)
    up = select_demos(q, pool, 5, SelectionStrategy(Strategy.ASCENDING, 3))
    down = select_demos(q, pool, 5, SelectionStrategy(Strategy.DESCENDING, 3))
    rnd = select_demos(q, pool, 5, SelectionStrategy(Strategy.RANDOM, 3))
    assert list(up.demos) == list(down.demos)[::-1]
    assert list(up.similarities) == sorted(up.similarities)
    assert set(rnd.demos) == set(up.demos)
    assert len(up) == 5


def test_small_pool_returns_everything():
    r = random.Random(2)
    pool = random_prefix_pool(r, 2)
    for strategy in strategies().values():
        got = select_demos(random_query(r), pool, 5, strategy)
        assert set(got.demos) == set(pool.entries)


def test_totally_random_is_reproducible():
    r = random.Random(3)
    pool = random_prefix_pool(r, 25)
    q = random_query(r)
    s = SelectionStrategy(Strategy.TOTALLY_RANDOM, 42)
    assert select_demos(q, pool, 5, s).demos == select_demos(q, pool, 5, s).demos
    other = select_demos(q, pool, 5, SelectionStrategy(Strategy.TOTALLY_RANDOM, 43))
    assert len(other) == 5


def test_exclusion_is_applied():
    d = PrefixDemo("Counter", "Counter()", "void reset()", "testReset", "Counter c = new Counter();")
    pool = DemoPool("prefix", (d,))
    with pytest.raises(EmptyPoolError):
        select_demos(query_for(d), pool, 5, SelectionStrategy())


def test_zero_shots():
    r = random.Random(4)
    pool = random_prefix_pool(r, 5)
    assert len(select_demos(random_query(r), pool, 0, SelectionStrategy())) == 0


def test_pool_index_matches_plain_pool():
    r = random.Random(5)
    pool = random_prefix_pool(r, 20)
    q = random_query(r)
    s = SelectionStrategy(Strategy.DESCENDING, 9)
    assert select_demos(q, PoolIndex(pool), 4, s) == select_demos(q, pool, 4, s)


def test_oracle_stage_query_includes_prefix():
    q = Query("A", "A()", "int f()")
    assert "new A(1)" in query_text(q, "A a = new A(1);")
    assert "new A(1)" not in query_text(q)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40), st.integers(1, 8))
def test_selection_properties(seed, n, k):
    r = random.Random(seed)
    pool = random_prefix_pool(r, n)
    q = random_query(r)
    try:
        got = {s: select_demos(q, pool, k, SelectionStrategy(s, seed)) for s in Strategy}
    except EmptyPoolError:
        return
    up, down = got[Strategy.ASCENDING], got[Strategy.DESCENDING]
    assert list(up.demos) == list(down.demos)[::-1]
    assert all(a <= b for a, b in zip(up.similarities, up.similarities[1:]))
    assert all(a >= b for a, b in zip(down.similarities, down.similarities[1:]))
    assert set(got[Strategy.RANDOM].demos) == set(up.demos)
    for sel in got.values():
        assert len(sel) <= k
        assert len(set(sel.demos)) == len(sel.demos)
