import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from satfuse.corpus import TokenizedDoc, Vocabulary
from satfuse.errors import FormatError, PipelineError
from satfuse.topics import (TopicDistribution, TopicModel, fit_lda, infer_theta,
                            infer_theta_batch, load_topic_model, per_token_loglik,
                            pool_by_course, save_topic_model)


def two_topic_corpus(n_docs=500, doc_len=10, vocab_per_topic=20, seed=0):
    """Generative oracle: two topics over disjoint vocabularies.

    Returns (docs, true_phi); each doc draws every token from one topic's
    uniform word distribution.
    """
    rng = np.random.default_rng(seed)
    n_terms = 2 * vocab_per_topic
    true_phi = np.zeros((2, n_terms))
    true_phi[0, :vocab_per_topic] = 1.0 / vocab_per_topic
    true_phi[1, vocab_per_topic:] = 1.0 / vocab_per_topic
    docs = []
    for i in range(n_docs):
        topic = i % 2
        lo = topic * vocab_per_topic
        toks = rng.integers(lo, lo + vocab_per_topic, size=doc_len)
        docs.append(TokenizedDoc(review_id=f"d{i}", tokens=[int(t) for t in toks]))
    return docs, true_phi


def matched_cosines(phi, true_phi):
    """Cosine similarity of fitted to generating rows under the optimal
    (Hungarian) topic permutation."""
    sims = np.zeros((phi.shape[0], true_phi.shape[0]))
    for i in range(phi.shape[0]):
        for j in range(true_phi.shape[0]):
            sims[i, j] = phi[i] @ true_phi[j] / (
                np.linalg.norm(phi[i]) * np.linalg.norm(true_phi[j]))
    rows, cols = linear_sum_assignment(-sims)
    return sims[rows, cols]


class TestFitLda:
    def test_recovers_disjoint_topics(self):
        docs, true_phi = two_topic_corpus()
        model = fit_lda(docs, k=2, alpha=1.0, beta=0.01, iterations=300,
                        burn_in=200, thin=5, seed=42)
        cos = matched_cosines(model.phi, true_phi)
        assert np.all(cos > 0.9), cos

    def test_single_word_corpus_count_estimator(self):
        # One post-burn-in sample over a one-token-type corpus: each row puts
        # (n_k + beta) / (n_k + V beta) on that word for an integer n_k.
        docs = [TokenizedDoc(review_id="d", tokens=[0] * 6)]
        vocab = Vocabulary(["aaa", "bbb"], {"aaa": 1, "bbb": 1})
        beta = 0.01
        model = fit_lda(docs, k=2, alpha=1.0, beta=beta, iterations=1,
                        burn_in=0, thin=1, seed=3, vocab=vocab)
        legal = {(n + beta) / (n + 2 * beta) for n in range(7)}
        for row in model.phi:
            assert any(abs(row[0] - v) < 1e-12 for v in legal), row
            assert row.sum() == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_given_seed(self):
        docs, _ = two_topic_corpus(n_docs=60)
        a = fit_lda(docs, k=2, iterations=50, burn_in=30, thin=2, seed=5)
        b = fit_lda(docs, k=2, iterations=50, burn_in=30, thin=2, seed=5)
        assert np.array_equal(a.phi, b.phi)

    def test_all_docs_empty_fatal(self):
        docs = [TokenizedDoc(review_id="d", tokens=[])]
        with pytest.raises(PipelineError):
            fit_lda(docs, k=2, iterations=10, burn_in=5, seed=0)

    def test_k_above_token_count_fatal(self):
        docs = [TokenizedDoc(review_id="d", tokens=[0, 1])]
        with pytest.raises(PipelineError):
            fit_lda(docs, k=3, iterations=10, burn_in=5, seed=0)

    def test_count_bookkeeping_invariant(self):
        docs, _ = two_topic_corpus(n_docs=30, doc_len=6)
        fit_lda(docs, k=2, iterations=20, burn_in=10, thin=2, seed=8,
                check_counts=True)  # raises internally on any count drift

    def test_permutation_equivariance_up_to_matching(self):
        # Relabeling topics at init cannot change which topics are found on a
        # well-identified corpus, only their order.
        docs, _ = two_topic_corpus(n_docs=500, doc_len=10)
        n_tokens = sum(len(d.tokens) for d in docs)
        rng = np.random.default_rng(4)
        init = rng.integers(0, 2, size=n_tokens)
        a = fit_lda(docs, k=2, iterations=300, burn_in=200, thin=5, seed=6,
                    init_z=init)
        b = fit_lda(docs, k=2, iterations=300, burn_in=200, thin=5, seed=6,
                    init_z=1 - init)
        cos = matched_cosines(a.phi, b.phi)
        assert np.all(cos > 0.9), cos

    def test_heldout_loglik_beats_single_topic(self):
        docs, _ = two_topic_corpus(n_docs=300)
        train, held = docs[:250], docs[250:]
        model2 = fit_lda(train, k=2, iterations=200, burn_in=150, thin=5, seed=1)
        # K=1 surrogate: both rows equal the corpus unigram distribution.
        counts = np.zeros(model2.n_terms)
        for d in train:
            for t in d.tokens:
                counts[t] += 1
        unigram = (counts + 0.01) / (counts.sum() + 0.01 * len(counts))
        model1 = TopicModel(k=2, phi=np.vstack([unigram, unigram]),
                            alpha=model2.alpha, beta=model2.beta)
        ll2 = per_token_loglik(model2, held, iterations=60, burn_in=30, seed=2)
        ll1 = per_token_loglik(model1, held, iterations=60, burn_in=30, seed=2)
        assert ll2 > ll1


class TestInferTheta:
    @pytest.fixture(scope="class")
    def fitted(self):
        docs, true_phi = two_topic_corpus()
        model = fit_lda(docs, k=2, alpha=1.0, beta=0.01, iterations=300,
                        burn_in=200, thin=5, seed=42)
        return docs, model, true_phi

    def test_empty_doc_uniform_k6(self):
        phi = np.full((6, 12), 1.0 / 12)
        model = TopicModel(k=6, phi=phi, alpha=50.0 / 6, beta=0.01)
        theta = infer_theta(model, TokenizedDoc(review_id="e", tokens=[]), seed=0)
        np.testing.assert_allclose(theta.theta, np.full(6, 1.0 / 6))

    def test_top_words_doc_concentrates(self, fitted):
        docs, model, true_phi = fitted
        # Identify the fitted row matching generating topic 0, then fold in a
        # doc made of that row's ten most likely words.
        fit_row = int(np.argmax(model.phi[:, :20].sum(axis=1)))
        top10 = list(np.argsort(model.phi[fit_row])[::-1][:10])
        doc = TokenizedDoc(review_id="probe", tokens=[int(w) for w in top10])
        theta = infer_theta(model, doc, iterations=100, burn_in=50, seed=9)
        assert theta.theta[fit_row] > 0.8

    def test_simplex_for_1000_random_docs(self, fitted):
        _, model, _ = fitted
        rng = np.random.default_rng(0)
        for i in range(1000):
            toks = [int(t) for t in rng.integers(0, model.n_terms,
                                                 size=rng.integers(0, 12))]
            theta = infer_theta(model, TokenizedDoc(review_id=f"x{i}", tokens=toks),
                                iterations=20, burn_in=10, seed=1).theta
            assert abs(theta.sum() - 1.0) <= 1e-9
            assert np.all(theta >= 0.0)

    def test_vocab_mismatch_fatal(self, fitted):
        _, model, _ = fitted
        doc = TokenizedDoc(review_id="bad", tokens=[model.n_terms + 3])
        with pytest.raises(PipelineError):
            infer_theta(model, doc, seed=0)

    def test_batch_matches_single(self, fitted):
        docs, model, _ = fitted
        subset = docs[:5]
        batch = infer_theta_batch(model, subset, iterations=40, burn_in=20, seed=7)
        for doc in subset:
            solo = infer_theta(model, doc, iterations=40, burn_in=20, seed=7)
            assert np.array_equal(batch[doc.review_id].theta, solo.theta)


class TestModelPlumbing:
    def test_save_load_roundtrip(self, tmp_path):
        docs, _ = two_topic_corpus(n_docs=40)
        model = fit_lda(docs, k=2, iterations=30, burn_in=20, seed=0)
        path = tmp_path / "tm.json"
        save_topic_model(model, path)
        loaded = load_topic_model(path)
        assert np.array_equal(loaded.phi, model.phi)
        assert (loaded.k, loaded.alpha, loaded.beta) == (model.k, model.alpha, model.beta)

    def test_load_validates_normalization(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "k": 2, "alpha": 1.0, "beta": 0.01, '
                        '"vocab_hash": "", "n_terms": 2, "phi": [0.9, 0.9, 0.5, 0.5]}')
        with pytest.raises(FormatError):
            load_topic_model(path)

    def test_simplex_type_rejects_bad_vectors(self):
        with pytest.raises(ValueError):
            TopicDistribution(np.array([0.6, 0.6]))
        with pytest.raises(ValueError):
            TopicDistribution(np.array([1.2, -0.2]))

    def test_pool_by_course_concatenates(self):
        docs = [TokenizedDoc("a", [1, 2]), TokenizedDoc("b", [3]),
                TokenizedDoc("c", [4, 5])]
        pooled = pool_by_course(docs, {"a": "c1", "b": "c2", "c": "c1"})
        assert [(d.review_id, d.tokens) for d in pooled] == [
            ("course::c1", [1, 2, 4, 5]), ("course::c2", [3])]
