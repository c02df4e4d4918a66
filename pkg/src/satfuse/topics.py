"""Short-text topic model: collapsed Gibbs LDA with per-review fold-in.

Reviews are too short for stable per-document topic counts, so training can
pool all reviews of a course into one document; inference always folds in a
single review against the fixed topic-word rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _gibbs
from .corpus import TokenizedDoc, Vocabulary
from .errors import FormatError, PipelineError
from .util import stable_seed

SIMPLEX_TOL = 1e-9


@dataclass
class TopicModel:
    """Fitted topic-word rows plus the priors that produced them."""

    k: int
    phi: np.ndarray  # K x V, rows on the simplex
    alpha: float
    beta: float
    vocab_hash: str = ""
    labels: list | None = None  # operator-assigned names, never inferred

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        if self.k < 2:
            raise ValueError("topic count must be >= 2")
        if self.phi.shape[0] != self.k:
            raise ValueError("phi row count does not match topic count")
        if np.any(self.phi < 0):
            raise ValueError("phi has negative entries")
        if np.max(np.abs(self.phi.sum(axis=1) - 1.0)) > SIMPLEX_TOL:
            raise ValueError("phi rows are not normalized")

    @property
    def n_terms(self):
        return self.phi.shape[1]

    def check_vocab(self, vocab: Vocabulary):
        if self.vocab_hash and vocab.checksum() != self.vocab_hash:
            raise PipelineError("vocabulary does not match the one this model was fitted on")

    def to_json(self) -> dict:
        obj = {
            "version": 1,
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "vocab_hash": self.vocab_hash,
            "n_terms": self.n_terms,
            "phi": [float(x) for x in self.phi.ravel()],
        }
        if self.labels is not None:
            obj["labels"] = list(self.labels)
        return obj

    @classmethod
    def from_json(cls, obj) -> "TopicModel":
        if obj.get("version") != 1:
            raise FormatError("unsupported topic model version")
        phi = np.asarray(obj["phi"], dtype=np.float64).reshape(obj["k"], obj["n_terms"])
        try:
            return cls(k=obj["k"], phi=phi, alpha=obj["alpha"], beta=obj["beta"],
                       vocab_hash=obj["vocab_hash"], labels=obj.get("labels"))
        except ValueError as e:
            raise FormatError(f"invalid persisted topic model: {e}") from e


def save_topic_model(model: TopicModel, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_json(), f, sort_keys=True)
        f.write("\n")


def load_topic_model(path) -> TopicModel:
    with open(path, "r", encoding="utf-8") as f:
        return TopicModel.from_json(json.load(f))


def pool_by_course(docs, course_of_review) -> list:
    """Concatenate all reviews of a course into one training document.

    Combats short-text sparsity at fit time; per-review distributions still
    come from fold-in inference.
    """
    pooled = {}
    order = []
    for doc in docs:
        course = course_of_review[doc.review_id]
        if course not in pooled:
            pooled[course] = []
            order.append(course)
        pooled[course].extend(doc.tokens)
    return [TokenizedDoc(review_id=f"course::{c}", tokens=pooled[c]) for c in sorted(order)]


def _to_csr(docs):
    lengths = [len(d.tokens) for d in docs]
    doc_ptr = np.zeros(len(docs) + 1, dtype=np.int64)
    np.cumsum(lengths, out=doc_ptr[1:])
    tokens = np.empty(int(doc_ptr[-1]), dtype=np.int32)
    pos = 0
    for d in docs:
        tokens[pos:pos + len(d.tokens)] = d.tokens
        pos += len(d.tokens)
    return tokens, doc_ptr


def _check_counts(ndk, nkw, nk, doc_ptr):
    doc_lengths = np.diff(doc_ptr)
    if not np.array_equal(ndk.sum(axis=1), doc_lengths):
        raise AssertionError("per-document topic counts do not sum to document lengths")
    if not np.array_equal(nkw.sum(axis=1), nk):
        raise AssertionError("per-topic word counts do not sum to topic totals")


def fit_lda(corpus, k: int, alpha: float | None = None, beta: float = 0.01,
            iterations: int = 1000, burn_in: int = 800, thin: int = 10,
            seed: int = 0, vocab: Vocabulary | None = None,
            init_z=None, check_counts: bool = False) -> TopicModel:
    """Collapsed Gibbs sampling over token-topic assignments.

    Topic-word rows are the average of smoothed count estimates over
    post-burn-in sweeps taken every ``thin`` sweeps.  A single seeded stream
    drives initialization and every sweep, so identical inputs give
    bit-identical models.

    ``init_z`` overrides the random initial assignments (testing hook).
    """
    if k < 2:
        raise ValueError("topic count must be >= 2")
    if not (iterations > burn_in >= 0):
        raise ValueError("need iterations > burn_in >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")

    tokens, doc_ptr = _to_csr(corpus)
    n_tokens = len(tokens)
    if n_tokens == 0:
        raise PipelineError("cannot fit topics: every document is empty")
    if k > n_tokens:
        raise PipelineError(f"topic count {k} exceeds total token count {n_tokens}")
    if vocab is not None:
        n_terms = len(vocab)
    else:
        n_terms = int(tokens.max()) + 1
    if tokens.min() < 0 or tokens.max() >= n_terms:
        raise PipelineError("token index outside vocabulary range")
    if alpha is None:
        alpha = 50.0 / k

    rng = np.random.default_rng(seed)
    if init_z is None:
        z = rng.integers(0, k, size=n_tokens, dtype=np.int32)
    else:
        z = np.asarray(init_z, dtype=np.int32).copy()
        if z.shape != (n_tokens,) or z.min() < 0 or z.max() >= k:
            raise ValueError("init_z must assign a valid topic to every token")

    n_docs = len(corpus)
    ndk = np.zeros((n_docs, k), dtype=np.int32)
    nkw = np.zeros((k, n_terms), dtype=np.int32)
    nk = np.zeros(k, dtype=np.int32)
    doc_of = np.repeat(np.arange(n_docs), np.diff(doc_ptr))
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, tokens), 1)
    np.add.at(nk, z, 1)

    phi_acc = np.zeros((k, n_terms))
    n_samples = 0
    for sweep in range(iterations):
        _gibbs.train_sweep(tokens, doc_ptr, z, ndk, nkw, nk,
                           float(alpha), float(beta), rng.random(n_tokens))
        if check_counts:
            _check_counts(ndk, nkw, nk, doc_ptr)
        if sweep >= burn_in and (sweep - burn_in) % thin == 0:
            phi_acc += (nkw + beta) / (nk + n_terms * beta)[:, None]
            n_samples += 1

    phi = phi_acc / n_samples
    phi /= phi.sum(axis=1, keepdims=True)  # remove accumulated rounding drift
    return TopicModel(k=k, phi=phi, alpha=float(alpha), beta=float(beta),
                      vocab_hash=vocab.checksum() if vocab is not None else "")


@dataclass
class TopicDistribution:
    """A point on the K-simplex for one review."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if np.any(self.theta < 0) or abs(self.theta.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("theta is not on the simplex")


def infer_theta(model: TopicModel, doc: TokenizedDoc, iterations: int = 100,
                burn_in: int = 50, seed: int = 0) -> TopicDistribution:
    """Fold-in Gibbs with topic-word rows fixed.

    The returned distribution is the smoothed assignment-count average over
    post-burn-in sweeps; an empty document yields the uniform distribution.
    The random stream is derived from (seed, review id), so results do not
    depend on which other documents are inferred alongside.
    """
    if not (iterations > burn_in >= 0):
        raise ValueError("need iterations > burn_in >= 0")
    if len(doc.tokens) == 0:
        return TopicDistribution(np.full(model.k, 1.0 / model.k))
    tokens = np.asarray(doc.tokens, dtype=np.int32)
    if tokens.min() < 0 or tokens.max() >= model.n_terms:
        raise PipelineError(
            f"document {doc.review_id!r} has token indices outside the model vocabulary"
        )
    rng = np.random.default_rng(stable_seed(seed, doc.review_id))
    u = rng.random((iterations + 1, len(tokens)))
    theta = _gibbs.fold_in(tokens, model.phi, float(model.alpha), u, burn_in)
    return TopicDistribution(theta / theta.sum())


def infer_theta_batch(model: TopicModel, docs, iterations: int = 100,
                      burn_in: int = 50, seed: int = 0) -> dict:
    """Per-review distributions keyed by review id (order-independent)."""
    return {
        doc.review_id: infer_theta(model, doc, iterations, burn_in, seed)
        for doc in docs
    }


def per_token_loglik(model: TopicModel, docs, iterations: int = 100,
                     burn_in: int = 50, seed: int = 0) -> float:
    """Average per-token log-likelihood under folded-in distributions.

    Used to compare topic counts: a model that captures real co-occurrence
    structure scores higher than a single-topic unigram baseline.
    """
    total = 0.0
    n = 0
    for doc in docs:
        if not doc.tokens:
            continue
        theta = infer_theta(model, doc, iterations, burn_in, seed).theta
        probs = theta @ model.phi[:, np.asarray(doc.tokens, dtype=np.int64)]
        total += float(np.sum(np.log(probs)))
        n += len(doc.tokens)
    if n == 0:
        raise PipelineError("no tokens to score")
    return total / n
