"""End-to-end artifact construction from a dataset and an experiment config.

The CLI persists each product between commands; tests and the evaluation
harness can build everything in memory through :func:`prepare_artifacts`.
All component models are fitted on the training split only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .behavior import NormStats, fit_norm_stats
from .config import ExperimentConfig
from .corpus import (DatasetSplit, Vocabulary, build_vocab, load_stopwords,
                     split_dataset, tokenize_dataset)
from .embed import (EmbeddingStore, FileStoreProvider, HttpEmbeddingProvider,
                    TestEncoderProvider, encode_batch, load_embeddings)
from .errors import ConfigError
from .fusion import SEGMENTS, DesignMatrix, assemble_matrix
from .topics import TopicModel, fit_lda, pool_by_course


@dataclass
class Artifacts:
    split: DatasetSplit
    vocab: Vocabulary
    topic_model: TopicModel
    store: EmbeddingStore
    norm_stats: NormStats
    design_train: DesignMatrix
    design_val: DesignMatrix
    design_test: DesignMatrix


def stopwords_for(cfg: ExperimentConfig):
    return load_stopwords(cfg.stopwords_path) if cfg.stopwords_path else None


def make_provider(cfg: ExperimentConfig):
    if cfg.embed_provider == "test":
        return TestEncoderProvider(dim=cfg.embed_dim,
                                   seed=cfg.seed_for("embedding", cfg.embed_seed))
    if cfg.embed_provider == "http":
        return HttpEmbeddingProvider(endpoint=cfg.embed_endpoint, window=cfg.embed_window)
    if cfg.embed_provider == "file":
        return FileStoreProvider(load_embeddings(cfg.embed_store_path))
    raise ConfigError(f"unknown embedding provider {cfg.embed_provider!r}")


def fit_topics(split: DatasetSplit, vocab: Vocabulary, cfg: ExperimentConfig) -> TopicModel:
    stop = stopwords_for(cfg)
    train_docs = tokenize_dataset(split.train, vocab, stopwords=stop)
    if cfg.pool_by_course:
        course_of = {r.id: r.course_id for r in split.train}
        fit_docs = pool_by_course(train_docs, course_of)
    else:
        fit_docs = train_docs
    model = fit_lda(
        fit_docs, k=cfg.topics_k, alpha=cfg.topics_alpha, beta=cfg.topics_beta,
        iterations=cfg.topics_iterations, burn_in=cfg.topics_burn_in,
        thin=cfg.topics_thin, seed=cfg.seed_for("topics", cfg.topics_seed),
        vocab=vocab,
    )
    model.labels = cfg.topic_labels
    return model


def embed_dataset(dataset, cfg: ExperimentConfig) -> EmbeddingStore:
    provider = make_provider(cfg)
    pairs = [(rec.id, rec.text) for rec in sorted(dataset, key=lambda r: r.id)]
    return encode_batch(provider, pairs, batch_size=cfg.embed_batch_size)


def build_designs(split: DatasetSplit, vocab, topic_model, store, norm_stats,
                  cfg: ExperimentConfig):
    stop = stopwords_for(cfg)
    designs = []
    for part in (split.train, split.val, split.test):
        designs.append(assemble_matrix(
            part, vocab, topic_model, store, norm_stats, mask=SEGMENTS,
            infer_iterations=cfg.infer_iterations, infer_burn_in=cfg.infer_burn_in,
            seed=cfg.seed_for("topics", cfg.topics_seed),
            max_drop_fraction=cfg.max_drop_fraction, stopwords=stop,
        ))
    return tuple(designs)


def prepare_artifacts(dataset, cfg: ExperimentConfig) -> Artifacts:
    split = split_dataset(dataset, cfg.split_ratios,
                          seed=cfg.seed_for("split", cfg.split_seed))
    stop = stopwords_for(cfg)
    vocab = build_vocab(split.train, min_doc_freq=cfg.min_doc_freq, stopwords=stop)
    topic_model = fit_topics(split, vocab, cfg)
    store = embed_dataset(dataset, cfg)
    norm_stats = fit_norm_stats(split.train, cfg.behavior_schema)
    d_train, d_val, d_test = build_designs(split, vocab, topic_model, store,
                                           norm_stats, cfg)
    return Artifacts(split=split, vocab=vocab, topic_model=topic_model,
                     store=store, norm_stats=norm_stats, design_train=d_train,
                     design_val=d_val, design_test=d_test)
