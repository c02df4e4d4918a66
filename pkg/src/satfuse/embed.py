"""Contextual sentiment embeddings behind a pluggable provider boundary.

Three providers satisfy the same interface: a deterministic test encoder
(hashed bag of tokens through a seeded Gaussian projection), a client for an
HTTP embedding service, and a lookup over a previously persisted store.
Swapping providers changes values but never shapes.
"""

from __future__ import annotations

import os
import re
import struct
import time
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import requests

from .errors import FormatError, ProviderError, TransientProviderError

MAGIC = b"EMB1"
FORMAT_VERSION = 1

_HASH_BUCKETS = 2048
_WORD_RE = re.compile(r"[^\W_]+")


class EmbeddingStore:
    """Immutable-by-convention map from review id to a fixed-dimension vector.

    Dimension uniformity is enforced at every insertion; vectors are float32
    so persistence is bit-exact.
    """

    def __init__(self, dim: int, provider_tag: str = ""):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.provider_tag = provider_tag
        self._vectors = {}

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, review_id):
        return review_id in self._vectors

    def ids(self):
        return list(self._vectors)

    def add(self, review_id: str, vector):
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise ValueError(
                f"vector for {review_id!r} has shape {vec.shape}, store dim is {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"vector for {review_id!r} has non-finite entries")
        self._vectors[review_id] = vec

    def get(self, review_id: str) -> np.ndarray:
        return self._vectors[review_id]

    def missing(self, review_ids) -> list:
        return [rid for rid in review_ids if rid not in self._vectors]


# ---------------------------------------------------------------------------
# Deterministic test encoder
# ---------------------------------------------------------------------------

_projection_cache = {}


def _projection(dim: int, seed: int) -> np.ndarray:
    key = (dim, seed)
    if key not in _projection_cache:
        rng = np.random.default_rng(seed)
        _projection_cache[key] = rng.standard_normal((_HASH_BUCKETS, dim))
    return _projection_cache[key]


def _hashed_counts(text: str) -> np.ndarray:
    counts = np.zeros(_HASH_BUCKETS)
    for tok in _WORD_RE.findall(text.lower()):
        bucket = zlib.crc32(tok.encode("utf-8")) % _HASH_BUCKETS
        counts[bucket] += 1.0
    return counts


def test_encode(text: str, dim: int = 16, seed: int = 0) -> np.ndarray:
    """Hash token counts into buckets, project with a Gaussian matrix fixed per
    (dim, seed), L2-normalize.  Empty text maps to the zero vector.

    Only the token multiset matters, so word order never changes the result.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    counts = _hashed_counts(text)
    total = counts.sum()
    if total == 0:
        return np.zeros(dim, dtype=np.float32)
    vec = counts @ _projection(dim, seed)
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec = vec / norm
    return vec.astype(np.float32)


class TestEncoderProvider:
    """Desk-scale stand-in for a contextual encoder service."""

    def __init__(self, dim: int = 16, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.tag = f"test-encoder-d{dim}-s{seed}"

    def encode(self, pairs):
        return [test_encode(text, self.dim, self.seed) for _, text in pairs]


class FileStoreProvider:
    """Serves embeddings for known ids out of an existing store."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self.dim = store.dim
        self.tag = store.provider_tag or "file"

    def encode(self, pairs):
        missing = self.store.missing([rid for rid, _ in pairs])
        if missing:
            raise ProviderError(
                f"{len(missing)} ids absent from embedding store", failed_ids=missing
            )
        return [self.store.get(rid) for rid, _ in pairs]


class HttpEmbeddingProvider:
    """Client for the POST /embed wire protocol.

    429 and 5xx responses are retryable; any other non-200 status is fatal.
    At most ``window`` requests are in flight at once.
    """

    def __init__(self, endpoint: str | None = None, window: int = 4, timeout: float = 30.0):
        endpoint = endpoint or os.environ.get("EMBED_ENDPOINT")
        if not endpoint:
            raise ProviderError("no endpoint: pass one or set EMBED_ENDPOINT")
        self.endpoint = endpoint.rstrip("/")
        self.window = max(1, int(window))
        self.timeout = timeout
        self.tag = f"http:{self.endpoint}"
        self.dim = None  # learned from the first response

    def encode(self, pairs):
        texts = [text for _, text in pairs]
        try:
            resp = requests.post(
                f"{self.endpoint}/embed", json={"texts": texts}, timeout=self.timeout
            )
        except requests.RequestException as e:
            raise TransientProviderError(f"request failed: {e}") from e
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"retryable status {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"embedding service returned status {resp.status_code}")
        body = resp.json()
        dim, embeddings = body["dim"], body["embeddings"]
        if len(embeddings) != len(texts):
            raise ProviderError(
                f"service returned {len(embeddings)} vectors for {len(texts)} texts"
            )
        return [np.asarray(e, dtype=np.float32).reshape(dim) for e in embeddings]


def encode_batch(provider, texts, batch_size: int = 32, retries: int = 3,
                 backoff: float = 0.5) -> EmbeddingStore:
    """Encode (id, text) pairs in chunks, one embedding per input id.

    Transient provider failures are retried with exponential backoff.  Either
    every id resolves or a ProviderError reports the ids that did not;
    partial results are never silently returned.  Dimension drift between
    chunks is fatal.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    pairs = list(texts)
    chunks = [pairs[i:i + batch_size] for i in range(0, len(pairs), batch_size)]

    def run_chunk(chunk):
        last = None
        for attempt in range(retries):
            try:
                return provider.encode(chunk)
            except TransientProviderError as e:
                last = e
                if attempt + 1 < retries:
                    time.sleep(backoff * (2 ** attempt))
        raise last

    results = [None] * len(chunks)
    failed_ids = []
    window = getattr(provider, "window", 1)
    with ThreadPoolExecutor(max_workers=max(1, window)) as pool:
        futures = {pool.submit(run_chunk, c): i for i, c in enumerate(chunks)}
        for fut, i in futures.items():
            try:
                results[i] = fut.result()
            except ProviderError as e:
                failed_ids.extend(e.failed_ids or [rid for rid, _ in chunks[i]])
            except Exception:
                failed_ids.extend(rid for rid, _ in chunks[i])
    if failed_ids:
        raise ProviderError(
            f"provider failed for {len(failed_ids)} ids after {retries} attempts",
            failed_ids=sorted(failed_ids),
        )

    dim = None
    for chunk_vectors in results:
        for vec in chunk_vectors:
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ProviderError(
                    f"dimension drift between batches: {dim} then {len(vec)}"
                )
    if dim is None:
        dim = getattr(provider, "dim", None) or 1

    store = EmbeddingStore(dim=dim, provider_tag=getattr(provider, "tag", ""))
    for chunk, chunk_vectors in zip(chunks, results):
        for (rid, _), vec in zip(chunk, chunk_vectors):
            store.add(rid, vec)
    return store


# ---------------------------------------------------------------------------
# Binary persistence: magic, version u16, dim u32, count u64, tag, records
# ---------------------------------------------------------------------------

def save_embeddings(store: EmbeddingStore, path):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HIQ", FORMAT_VERSION, store.dim, len(store)))
        tag = store.provider_tag.encode("utf-8")
        f.write(struct.pack("<H", len(tag)))
        f.write(tag)
        for rid in store.ids():
            rid_b = rid.encode("utf-8")
            f.write(struct.pack("<H", len(rid_b)))
            f.write(rid_b)
            f.write(store.get(rid).astype("<f4").tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated embedding store while reading {what}")
    return buf


def load_embeddings(path) -> EmbeddingStore:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise FormatError(f"{path}: bad magic, not an embedding store")
        version, dim, count = struct.unpack("<HIQ", _read_exact(f, 14, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported store version {version}")
        (tag_len,) = struct.unpack("<H", _read_exact(f, 2, "tag length"))
        tag = _read_exact(f, tag_len, "tag").decode("utf-8")
        store = EmbeddingStore(dim=dim, provider_tag=tag)
        rec_bytes = 4 * dim
        for _ in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(f, 2, "id length"))
            rid = _read_exact(f, id_len, "id").decode("utf-8")
            vec = np.frombuffer(_read_exact(f, rec_bytes, "vector"), dtype="<f4")
            store.add(rid, vec)
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after {count} records")
    return store
