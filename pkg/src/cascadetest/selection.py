"""Few-shot demo selection: embed, cluster, pick the best demo per cluster, order."""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .corpus import DemoPool, OracleDemo, PrefixDemo, exclusion_filter
from .errors import DimensionError, EmbeddingBackendError, EmptyPoolError, ZeroNormError
from .query import Query

DEFAULT_DIM = 512
MAX_ITER = 100

_WORD = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*|\d+")
_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    """Lower-cased identifier tokens plus their camelCase parts."""
    out = []
    for word in _WORD.findall(text):
        low = word.lower()
        out.append(low)
        parts = [p.lower() for p in _CAMEL.findall(word)]
        if len(parts) > 1:
            out.extend(parts)
    return out


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


class HashEmbedder:
    """Offline bag-of-tokens embedding: hashed token counts, L2-normalised."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingBackendError("EmptyInput: cannot embed empty text")
        vec = np.zeros(self.dim)
        for tok in tokenize(text):
            vec[_bucket(tok, self.dim)] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0:
            # punctuation-only input; fall back to hashing the raw text
            vec[_bucket(text, self.dim)] = 1.0
            norm = 1.0
        return vec / norm


class RemoteEmbedder:
    """POST ``{"input": text}`` to an endpoint answering ``{"vector": [...]}``."""

    def __init__(self, endpoint: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingBackendError("EmptyInput: cannot embed empty text")
        try:
            resp = self.client.post(self.endpoint, json={"input": text})
            resp.raise_for_status()
            vec = np.asarray(resp.json()["vector"], dtype=float)
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise EmbeddingBackendError(f"embedding backend failed: {exc}") from exc
        if vec.ndim != 1 or vec.size == 0:
            raise EmbeddingBackendError("embedding backend returned an empty vector")
        return vec


def make_embedder(config: dict | None) -> Embedder:
    config = config or {}
    kind = config.get("backend", "local-hash")
    if kind == "local-hash":
        return HashEmbedder(int(config.get("dim", DEFAULT_DIM)))
    if kind == "remote":
        if not config.get("endpoint"):
            raise EmbeddingBackendError("remote embedding backend needs an endpoint")
        return RemoteEmbedder(config["endpoint"], float(config.get("timeout", 30.0)))
    raise EmbeddingBackendError(f"unknown embedding backend {kind!r}")


def embed(text: str, backend: Embedder | None = None) -> np.ndarray:
    return (backend or HashEmbedder()).embed(text)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroNormError("cosine of a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# ---------------------------------------------------------------------------
# clustering


def cluster(embeddings: Sequence, k: int, seed: int) -> np.ndarray:
    """Seeded k-means (k-means++ initialisation, Euclidean distance).

    The effective number of clusters is ``min(k, number of distinct points)``.
    Labels are renumbered in order of first appearance so they are stable
    for a given seed.
    """
    X = np.asarray(embeddings, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("cluster needs a non-empty 2-D array of embeddings")
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(X, axis=0)
    k = min(k, len(distinct))
    rng = np.random.default_rng(seed)

    centers = _kmeans_pp(distinct, k, rng)
    labels = None
    for _ in range(MAX_ITER):
        d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d.argmin(axis=1)  # ties go to the lowest index
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(centers)):
            members = X[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    _, first = np.unique(labels, return_index=True)
    order = {old: i for i, old in enumerate(labels[np.sort(first)])}
    return np.array([order[x] for x in labels])


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[rng.integers(len(points))]]
    for _ in range(1, k):
        d = np.min([((points - c) ** 2).sum(axis=1) for c in centers], axis=0)
        total = d.sum()
        if total == 0:
            break
        centers.append(points[rng.choice(len(points), p=d / total)])
    return np.array(centers, dtype=float)


# ---------------------------------------------------------------------------
# selection


class Strategy(str, enum.Enum):
    RANDOM = "random"
    ASCENDING = "ascending"
    DESCENDING = "descending"
    TOTALLY_RANDOM = "totally_random"


@dataclass(frozen=True)
class SelectionStrategy:
    kind: Strategy = Strategy.RANDOM
    seed: int = 0

    @classmethod
    def parse(cls, name: str, seed: int = 0) -> "SelectionStrategy":
        return cls(Strategy(name.replace("-", "_").lower()), seed)


@dataclass(frozen=True)
class SelectedDemos:
    demos: tuple
    similarities: tuple
    strategy: SelectionStrategy

    def __len__(self) -> int:
        return len(self.demos)


def demo_text(demo) -> str:
    """Text fed to the embedder; mirrors how the demo is laid out in prompts."""
    if isinstance(demo, PrefixDemo):
        return "\n".join([demo.focal_class, demo.constructor_params,
                          demo.focal_method_signature, demo.test_prefix])
    if isinstance(demo, OracleDemo):
        return "\n".join([demo.focal_method_signature, demo.test_body_with_placeholder,
                          demo.test_oracle])
    raise TypeError(f"not a demo: {demo!r}")


def query_text(query: Query, generated_prefix: str | None = None) -> str:
    if generated_prefix is None:
        return "\n".join([query.class_name, query.constructor_signature, query.focal_method_signature])
    return "\n".join([query.focal_method_signature, generated_prefix])


class PoolIndex:
    """A pool with its demo embeddings computed once."""

    def __init__(self, pool: DemoPool, embedder: Embedder | None = None):
        self.pool = pool
        self.embedder = embedder or HashEmbedder()
        self.vectors = (np.array([self.embedder.embed(demo_text(d)) for d in pool.entries])
                        if len(pool) else np.zeros((0, 0)))

    def subset(self, keep: Sequence[int]) -> tuple[list, np.ndarray]:
        return [self.pool.entries[i] for i in keep], self.vectors[list(keep)]


def select_demos(query: Query, pool: DemoPool | PoolIndex, k: int, strategy: SelectionStrategy,
                 embedder: Embedder | None = None, generated_prefix: str | None = None,
                 rng: np.random.Generator | None = None) -> SelectedDemos:
    """Choose up to ``k`` demos for ``query`` and order them per ``strategy``.

    Demos that would leak the query (same class name and focal signature) are
    removed first.  ``generated_prefix`` is folded into the query text for the
    oracle stage.
    """
    index = pool if isinstance(pool, PoolIndex) else PoolIndex(pool, embedder)
    embedder = index.embedder
    filtered = exclusion_filter(index.pool, query)
    allowed = set(filtered.entries)
    keep = [i for i, d in enumerate(index.pool.entries) if d in allowed]
    if not keep:
        raise EmptyPoolError("no demos left to select from")
    if k <= 0:
        return SelectedDemos((), (), strategy)
    demos, vectors = index.subset(keep)
    qv = embedder.embed(query_text(query, generated_prefix))
    sims = np.array([cosine(qv, v) for v in vectors])
    rng = rng if rng is not None else np.random.default_rng(strategy.seed)

    if strategy.kind is Strategy.TOTALLY_RANDOM:
        n = min(k, len(demos))
        picked = [int(i) for i in rng.choice(len(demos), size=n, replace=False)]
        return SelectedDemos(tuple(demos[i] for i in picked),
                             tuple(float(sims[i]) for i in picked), strategy)

    if len(demos) <= k:
        picked = list(range(len(demos)))
    else:
        labels = cluster(vectors, k, int(rng.integers(2**63)))
        picked = []
        for c in range(labels.max() + 1):
            members = np.flatnonzero(labels == c)
            picked.append(int(members[np.argmax(sims[members])]))

    ascending = sorted(picked, key=lambda i: (sims[i], i))
    if strategy.kind is Strategy.ASCENDING:
        order = ascending
    elif strategy.kind is Strategy.DESCENDING:
        order = ascending[::-1]
    else:
        order = [ascending[int(j)] for j in rng.permutation(len(ascending))]
    return SelectedDemos(tuple(demos[i] for i in order), tuple(float(sims[i]) for i in order),
                         strategy)
