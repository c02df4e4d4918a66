"""Declarative experiment configuration.

A single JSON document drives every pipeline stage.  Unknown keys are
rejected (use ``_notes`` anywhere for commentary), every seed flows from the
config, and each command writes the fully resolved document beside its
outputs so a run directory is self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .behavior import BehaviorSchema, FeatureSpec
from .errors import ConfigError
from .fusion import SEGMENTS, normalize_mask
from .regress import RegressorSpec
from .synth import SyntheticSpec
from .util import stable_seed

FULL_MASK = list(SEGMENTS)

_DEFAULT_BACKBONES = [
    {"name": "linear", "backbone": "linear", "params": {}},
    {"name": "ridge", "backbone": "ridge", "params": {}},
    {"name": "forest", "backbone": "forest", "params": {}},
    {"name": "gbrt", "backbone": "gbrt", "params": {"leaf_l2": 0.0}},
    {"name": "gbrt_regularized", "backbone": "gbrt",
     "params": {"leaf_l2": 1.0, "min_child_weight": 5}},
    {"name": "gbrt_histogram", "backbone": "gbrt",
     "params": {"splitter": "histogram", "growth": "leaf", "max_leaves": 31}},
    {"name": "mlp", "backbone": "mlp", "params": {}},
]


def _check_keys(obj, allowed, where):
    unknown = sorted(k for k in obj if k not in allowed and k != "_notes")
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _get(obj, key, default, types, where):
    val = obj.get(key, default)
    if val is None:
        return None
    if not isinstance(val, types):
        raise ConfigError(f"{where}.{key}: expected {types}, got {type(val).__name__}")
    return val


@dataclass
class BackboneEntry:
    name: str
    spec: RegressorSpec


@dataclass
class ExperimentConfig:
    seed: int
    dataset_path: str | None = None
    dataset_format: str = "jsonl"
    split_ratios: tuple = (0.8, 0.1, 0.1)
    split_seed: int | None = None
    min_doc_freq: int = 2
    stopwords_path: str | None = None

    topics_k: int = 6
    topics_alpha: float | None = None  # None -> 50 / k
    topics_beta: float = 0.01
    topics_iterations: int = 1000
    topics_burn_in: int = 800
    topics_thin: int = 10
    pool_by_course: bool = True
    infer_iterations: int = 100
    infer_burn_in: int = 50
    topics_seed: int | None = None
    topic_labels: list | None = None

    embed_provider: str = "test"
    embed_dim: int = 768
    embed_seed: int | None = None
    embed_endpoint: str | None = None
    embed_batch_size: int = 64
    embed_window: int = 4
    embed_store_path: str | None = None

    behavior_schema: BehaviorSchema = field(default_factory=BehaviorSchema)

    masks: list = field(default_factory=lambda: [
        FULL_MASK,
        ["sentiment", "behavior"],
        ["topic", "behavior"],
        ["topic", "sentiment"],
    ])
    clamp_predictions: bool = False
    max_drop_fraction: float = 0.1

    backbones: list = field(default_factory=list)

    ablation_backbone: str = "mlp"
    domain_floor: int = 30
    reference_rmse: dict | None = None
    assertions: list = field(default_factory=list)

    synthetic: SyntheticSpec | None = None

    def seed_for(self, stage: str, explicit=None) -> int:
        """Per-stage seed: the explicit config value or a stable derivation."""
        if explicit is not None:
            return explicit
        return stable_seed(self.seed, stage)

    def backbone_by_name(self, name: str) -> RegressorSpec:
        for entry in self.backbones:
            if entry.name == name:
                return entry.spec
        raise ConfigError(f"no configured backbone named {name!r}")

    # -- parsing ------------------------------------------------------------

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        _check_keys(obj, {"seed", "dataset", "split", "tokenizer", "topics",
                          "embedding", "behavior", "fusion", "backbones",
                          "eval", "synthetic"}, "config")
        if "seed" not in obj or not isinstance(obj["seed"], int):
            raise ConfigError("config.seed: required integer")
        cfg = cls(seed=obj["seed"])

        ds = obj.get("dataset", {}) or {}
        _check_keys(ds, {"path", "format"}, "dataset")
        cfg.dataset_path = _get(ds, "path", None, str, "dataset")
        cfg.dataset_format = _get(ds, "format", "jsonl", str, "dataset")
        if cfg.dataset_format not in ("jsonl", "csv"):
            raise ConfigError(f"dataset.format: unknown format {cfg.dataset_format!r}")

        sp = obj.get("split", {}) or {}
        _check_keys(sp, {"ratios", "seed"}, "split")
        ratios = _get(sp, "ratios", list(cfg.split_ratios), (list, tuple), "split")
        if len(ratios) != 3 or not all(isinstance(r, (int, float)) for r in ratios):
            raise ConfigError("split.ratios: expected three numbers")
        cfg.split_ratios = tuple(float(r) for r in ratios)
        cfg.split_seed = _get(sp, "seed", None, int, "split")

        tok = obj.get("tokenizer", {}) or {}
        _check_keys(tok, {"min_doc_freq", "stopwords_path"}, "tokenizer")
        cfg.min_doc_freq = _get(tok, "min_doc_freq", 2, int, "tokenizer")
        cfg.stopwords_path = _get(tok, "stopwords_path", None, str, "tokenizer")

        tp = obj.get("topics", {}) or {}
        _check_keys(tp, {"k", "alpha", "beta", "iterations", "burn_in", "thin",
                         "pool_by_course", "infer_iterations", "infer_burn_in",
                         "seed", "labels"}, "topics")
        cfg.topics_k = _get(tp, "k", 6, int, "topics")
        cfg.topics_alpha = _get(tp, "alpha", None, (int, float), "topics")
        cfg.topics_beta = float(_get(tp, "beta", 0.01, (int, float), "topics"))
        cfg.topics_iterations = _get(tp, "iterations", 1000, int, "topics")
        cfg.topics_burn_in = _get(tp, "burn_in", 800, int, "topics")
        cfg.topics_thin = _get(tp, "thin", 10, int, "topics")
        cfg.pool_by_course = _get(tp, "pool_by_course", True, bool, "topics")
        cfg.infer_iterations = _get(tp, "infer_iterations", 100, int, "topics")
        cfg.infer_burn_in = _get(tp, "infer_burn_in", 50, int, "topics")
        cfg.topics_seed = _get(tp, "seed", None, int, "topics")
        cfg.topic_labels = _get(tp, "labels", None, list, "topics")
        if cfg.topic_labels is not None and len(cfg.topic_labels) != cfg.topics_k:
            raise ConfigError("topics.labels: need exactly one label per topic")

        em = obj.get("embedding", {}) or {}
        _check_keys(em, {"provider", "dim", "seed", "endpoint", "batch_size",
                         "window", "store_path"}, "embedding")
        cfg.embed_provider = _get(em, "provider", "test", str, "embedding")
        if cfg.embed_provider not in ("test", "http", "file"):
            raise ConfigError(f"embedding.provider: unknown provider {cfg.embed_provider!r}")
        cfg.embed_dim = _get(em, "dim", 768, int, "embedding")
        cfg.embed_seed = _get(em, "seed", None, int, "embedding")
        cfg.embed_endpoint = _get(em, "endpoint", None, str, "embedding")
        cfg.embed_batch_size = _get(em, "batch_size", 64, int, "embedding")
        cfg.embed_window = _get(em, "window", 4, int, "embedding")
        cfg.embed_store_path = _get(em, "store_path", None, str, "embedding")
        if cfg.embed_provider == "file" and not cfg.embed_store_path:
            raise ConfigError("embedding.store_path: required for the file provider")

        bh = obj.get("behavior", None)
        if bh is not None:
            _check_keys(bh, {"features", "completion_scheme"}, "behavior")
            features = []
            for i, f in enumerate(bh.get("features", [])):
                _check_keys(f, {"name", "scheme", "pooling", "decay_per_day"},
                            f"behavior.features[{i}]")
                features.append(FeatureSpec(
                    name=f["name"],
                    scheme=f.get("scheme", "zscore"),
                    pooling=f.get("pooling", "exp_decay"),
                    decay_per_day=float(f.get("decay_per_day", 0.05)),
                ))
            cfg.behavior_schema = BehaviorSchema(
                features=features or BehaviorSchema().features,
                completion_scheme=bh.get("completion_scheme", "minmax"),
            )

        fu = obj.get("fusion", {}) or {}
        _check_keys(fu, {"masks", "clamp_predictions", "max_drop_fraction"}, "fusion")
        if "masks" in fu:
            cfg.masks = [list(normalize_mask(m)) for m in fu["masks"]]
        cfg.clamp_predictions = _get(fu, "clamp_predictions", False, bool, "fusion")
        cfg.max_drop_fraction = float(_get(fu, "max_drop_fraction", 0.1, (int, float), "fusion"))

        entries = obj.get("backbones", _DEFAULT_BACKBONES)
        cfg.backbones = []
        names = set()
        for i, entry in enumerate(entries):
            _check_keys(entry, {"name", "backbone", "seed", "params"}, f"backbones[{i}]")
            name = entry.get("name") or entry["backbone"]
            if name in names:
                raise ConfigError(f"backbones[{i}]: duplicate name {name!r}")
            names.add(name)
            spec = RegressorSpec(
                backbone=entry["backbone"],
                seed=cfg.seed_for(f"backbone:{name}", entry.get("seed")),
                params=dict(entry.get("params", {})),
            )
            cfg.backbones.append(BackboneEntry(name=name, spec=spec))

        ev = obj.get("eval", {}) or {}
        _check_keys(ev, {"ablation_backbone", "domain_floor", "reference_rmse",
                         "assertions"}, "eval")
        cfg.ablation_backbone = _get(ev, "ablation_backbone", "mlp", str, "eval")
        cfg.domain_floor = _get(ev, "domain_floor", 30, int, "eval")
        cfg.reference_rmse = _get(ev, "reference_rmse", None, dict, "eval")
        cfg.assertions = _get(ev, "assertions", [], list, "eval")
        for a in cfg.assertions:
            if a not in ("benchmark_ordering", "ablation_ordering"):
                raise ConfigError(f"eval.assertions: unknown assertion {a!r}")

        syn = obj.get("synthetic", None)
        if syn is not None:
            allowed = {"n_reviews", "n_courses", "topic_weight", "sentiment_weight",
                       "behavior_weight", "noise_sigma", "seed", "n_filler_words",
                       "mean_extra_tokens", "missing_rate", "domain_noise"}
            _check_keys(syn, allowed, "synthetic")
            kwargs = {k: v for k, v in syn.items() if k in allowed}
            try:
                cfg.synthetic = SyntheticSpec(**kwargs)
            except ValueError as e:
                raise ConfigError(f"synthetic: {e}") from e

        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON: {e}") from e
        except OSError as e:
            raise ConfigError(f"{path}: {e}") from e
        return cls.from_json(obj)

    def resolved(self) -> dict:
        """The fully resolved document, written beside every run's outputs."""
        return {
            "seed": self.seed,
            "dataset": {"path": self.dataset_path, "format": self.dataset_format},
            "split": {"ratios": list(self.split_ratios),
                      "seed": self.seed_for("split", self.split_seed)},
            "tokenizer": {"min_doc_freq": self.min_doc_freq,
                          "stopwords_path": self.stopwords_path},
            "topics": {
                "k": self.topics_k,
                "alpha": self.topics_alpha if self.topics_alpha is not None
                         else 50.0 / self.topics_k,
                "beta": self.topics_beta,
                "iterations": self.topics_iterations,
                "burn_in": self.topics_burn_in,
                "thin": self.topics_thin,
                "pool_by_course": self.pool_by_course,
                "infer_iterations": self.infer_iterations,
                "infer_burn_in": self.infer_burn_in,
                "seed": self.seed_for("topics", self.topics_seed),
                "labels": self.topic_labels,
            },
            "embedding": {
                "provider": self.embed_provider,
                "dim": self.embed_dim,
                "seed": self.seed_for("embedding", self.embed_seed),
                "endpoint": self.embed_endpoint,
                "batch_size": self.embed_batch_size,
                "window": self.embed_window,
                "store_path": self.embed_store_path,
            },
            "behavior": {
                "features": [
                    {"name": f.name, "scheme": f.scheme, "pooling": f.pooling,
                     "decay_per_day": f.decay_per_day}
                    for f in self.behavior_schema.features
                ],
                "completion_scheme": self.behavior_schema.completion_scheme,
            },
            "fusion": {"masks": [list(m) for m in self.masks],
                       "clamp_predictions": self.clamp_predictions,
                       "max_drop_fraction": self.max_drop_fraction},
            "backbones": [
                {"name": e.name, "backbone": e.spec.backbone, "seed": e.spec.seed,
                 "params": dict(e.spec.params)}
                for e in self.backbones
            ],
            "eval": {"ablation_backbone": self.ablation_backbone,
                     "domain_floor": self.domain_floor,
                     "reference_rmse": self.reference_rmse,
                     "assertions": list(self.assertions)},
            "synthetic": None if self.synthetic is None else {
                "n_reviews": self.synthetic.n_reviews,
                "n_courses": self.synthetic.n_courses,
                "topic_weight": self.synthetic.topic_weight,
                "sentiment_weight": self.synthetic.sentiment_weight,
                "behavior_weight": self.synthetic.behavior_weight,
                "noise_sigma": self.synthetic.noise_sigma,
                "seed": self.synthetic.seed,
                "n_filler_words": self.synthetic.n_filler_words,
                "mean_extra_tokens": self.synthetic.mean_extra_tokens,
                "missing_rate": self.synthetic.missing_rate,
                "domain_noise": self.synthetic.domain_noise,
            },
        }
