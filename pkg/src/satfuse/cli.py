"""Command-line pipeline driver.

Commands compose through files in the output directory: each stage reads the
artifacts of earlier stages and writes its own, so a run directory plus its
resolved config reproduces the experiment exactly.  Exit codes: 0 success,
1 runtime failure, 2 config error, 3 configured assertion failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation
from .behavior import NormStats, fit_norm_stats
from .config import ExperimentConfig
from .corpus import (DatasetSplit, Vocabulary, ingest_reviews, split_dataset,
                     write_reject_report, write_reviews_jsonl)
from .embed import load_embeddings, save_embeddings
from .errors import ConfigError, PipelineError
from .fusion import load_design, save_design
from .pipeline import Artifacts, build_designs, embed_dataset, fit_topics, stopwords_for
from .regress import load_model, save_model, train
from .synth import generate_synthetic
from .topics import load_topic_model, save_topic_model

DATASET_FILE = "dataset.jsonl"
REJECTS_FILE = "rejects.jsonl"
LATENTS_FILE = "latents.json"
SPLITS_FILE = "splits.json"
VOCAB_FILE = "vocab.json"
TOPICS_FILE = "topic_model.json"
EMBED_FILE = "embeddings.emb"
NORM_FILE = "norm_stats.json"
CONFIG_FILE = "resolved_config.json"


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _require(out: Path, filename: str, producer: str) -> Path:
    path = out / filename
    if not path.exists():
        raise PipelineError(f"missing {filename}; run `{producer}` first")
    return path


def _load_dataset(out: Path):
    path = _require(out, DATASET_FILE, "ingest (or synth)")
    result = ingest_reviews(path, format="jsonl")
    if result.rejects:
        raise PipelineError(f"{DATASET_FILE} is not canonical: {result.rejects[0]}")
    return result.dataset


def _load_split(out: Path) -> DatasetSplit:
    dataset = _load_dataset(out)
    ids = _read_json(_require(out, SPLITS_FILE, "split"))
    by_id = {r.id: r for r in dataset}
    try:
        return DatasetSplit(
            train=[by_id[i] for i in ids["train"]],
            val=[by_id[i] for i in ids["val"]],
            test=[by_id[i] for i in ids["test"]],
        )
    except KeyError as e:
        raise PipelineError(f"{SPLITS_FILE} references unknown review id {e}")


def _load_artifacts(out: Path) -> Artifacts:
    split = _load_split(out)
    vocab = Vocabulary.from_json(_read_json(_require(out, VOCAB_FILE, "fit-topics")))
    topic_model = load_topic_model(_require(out, TOPICS_FILE, "fit-topics"))
    store = load_embeddings(_require(out, EMBED_FILE, "embed"))
    norm_stats = NormStats.from_json(_read_json(_require(out, NORM_FILE, "featurize")))
    designs = []
    for part in ("train", "val", "test"):
        _require(out, f"design_{part}.json", "featurize")
        designs.append(load_design(out / f"design_{part}"))
    return Artifacts(split=split, vocab=vocab, topic_model=topic_model,
                     store=store, norm_stats=norm_stats, design_train=designs[0],
                     design_val=designs[1], design_test=designs[2])


def _write_report(report, out: Path, stem: str):
    _write_json(report.to_json(), out / f"{stem}.json")
    with open(out / f"{stem}.txt", "w", encoding="utf-8") as f:
        f.write(report.render_text())


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: ExperimentConfig, out: Path, args) -> int:
    if cfg.synthetic is None:
        raise ConfigError("synth requires a `synthetic` section in the config")
    result = generate_synthetic(cfg.synthetic)
    write_reviews_jsonl(result.dataset, out / DATASET_FILE)
    _write_json(result.latents, out / LATENTS_FILE)
    print(f"wrote {len(result.dataset)} synthetic reviews to {out / DATASET_FILE}")
    return 0


def cmd_ingest(cfg: ExperimentConfig, out: Path, args) -> int:
    if not cfg.dataset_path:
        raise ConfigError("ingest requires dataset.path in the config")
    keys = set(cfg.behavior_schema.raw_feature_names())
    result = ingest_reviews(cfg.dataset_path, format=cfg.dataset_format,
                            behavior_keys=keys)
    write_reviews_jsonl(result.dataset, out / DATASET_FILE)
    write_reject_report(result.rejects, out / REJECTS_FILE)
    print(f"ingested {len(result.dataset)} records, rejected {len(result.rejects)}")
    return 0


def cmd_split(cfg: ExperimentConfig, out: Path, args) -> int:
    dataset = _load_dataset(out)
    split = split_dataset(dataset, cfg.split_ratios,
                          seed=cfg.seed_for("split", cfg.split_seed))
    _write_json(split.ids(), out / SPLITS_FILE)
    print(f"split sizes: train={len(split.train)} val={len(split.val)} test={len(split.test)}")
    return 0


def cmd_fit_topics(cfg: ExperimentConfig, out: Path, args) -> int:
    from .corpus import build_vocab

    split = _load_split(out)
    vocab = build_vocab(split.train, min_doc_freq=cfg.min_doc_freq,
                        stopwords=stopwords_for(cfg))
    model = fit_topics(split, vocab, cfg)
    _write_json(vocab.to_json(), out / VOCAB_FILE)
    save_topic_model(model, out / TOPICS_FILE)
    print(f"fitted {model.k} topics over {len(vocab)} terms")
    return 0


def cmd_embed(cfg: ExperimentConfig, out: Path, args) -> int:
    dataset = _load_dataset(out)
    store = embed_dataset(dataset, cfg)
    save_embeddings(store, out / EMBED_FILE)
    print(f"embedded {len(store)} reviews at dim {store.dim} via {store.provider_tag}")
    return 0


def cmd_featurize(cfg: ExperimentConfig, out: Path, args) -> int:
    split = _load_split(out)
    vocab = Vocabulary.from_json(_read_json(_require(out, VOCAB_FILE, "fit-topics")))
    topic_model = load_topic_model(_require(out, TOPICS_FILE, "fit-topics"))
    topic_model.check_vocab(vocab)
    store = load_embeddings(_require(out, EMBED_FILE, "embed"))
    norm_stats = fit_norm_stats(split.train, cfg.behavior_schema)
    _write_json(norm_stats.to_json(), out / NORM_FILE)
    designs = build_designs(split, vocab, topic_model, store, norm_stats, cfg)
    for part, design in zip(("train", "val", "test"), designs):
        save_design(design, out / f"design_{part}")
    print(f"assembled design matrices: p={designs[0].p}, "
          f"n={designs[0].n}/{designs[1].n}/{designs[2].n}")
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path, args) -> int:
    artifacts = _load_artifacts(out)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    for entry in cfg.backbones:
        model = train(entry.spec, artifacts.design_train.X, artifacts.design_train.y,
                      val=(artifacts.design_val.X, artifacts.design_val.y))
        save_model(model, models_dir / f"{entry.name}.json")
        print(f"trained {entry.name} ({entry.spec.backbone})")
    return 0


def cmd_benchmark(cfg: ExperimentConfig, out: Path, args) -> int:
    artifacts = _load_artifacts(out)
    report = evaluation.run_benchmark(
        artifacts, [(e.name, e.spec) for e in cfg.backbones],
        clamp=cfg.clamp_predictions, min_doc_freq=cfg.min_doc_freq,
        stopwords=stopwords_for(cfg), reference_rmse=cfg.reference_rmse,
    )
    _write_report(report, out, "report_benchmark")
    print(report.render_text())
    if "benchmark_ordering" in cfg.assertions:
        failures = evaluation.check_benchmark_ordering(report, best=cfg.ablation_backbone)
        if failures:
            print("assertion failures:\n  " + "\n  ".join(failures), file=sys.stderr)
            return 3
    return 0


def cmd_ablate(cfg: ExperimentConfig, out: Path, args) -> int:
    artifacts = _load_artifacts(out)
    spec = cfg.backbone_by_name(cfg.ablation_backbone)
    report = evaluation.run_ablation(artifacts, spec, masks=cfg.masks,
                                     clamp=cfg.clamp_predictions)
    _write_report(report, out, "report_ablation")
    print(report.render_text())
    if "ablation_ordering" in cfg.assertions:
        failures = evaluation.check_ablation_ordering(report)
        if failures:
            print("assertion failures:\n  " + "\n  ".join(failures), file=sys.stderr)
            return 3
    return 0


def cmd_report(cfg: ExperimentConfig, out: Path, args) -> int:
    artifacts = _load_artifacts(out)
    domains = evaluation.domain_breakdown(
        artifacts, [(e.name, e.spec) for e in cfg.backbones],
        min_group=cfg.domain_floor, clamp=cfg.clamp_predictions,
    )
    _write_report(domains, out, "report_domains")

    model_path = _require(out, f"models/{cfg.ablation_backbone}.json", "train")
    trained = load_model(model_path)
    dataset = _load_dataset(out)
    errors = evaluation.top_errors(trained, artifacts.design_test, k=args.top_k,
                                   dataset=dataset, clamp=cfg.clamp_predictions)
    _write_json({"model": cfg.ablation_backbone, "rows": errors},
                out / "report_top_errors.json")
    print(domains.render_text())
    print(f"wrote top-{len(errors)} error report for {cfg.ablation_backbone}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "split": cmd_split,
    "fit-topics": cmd_fit_topics,
    "embed": cmd_embed,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "benchmark": cmd_benchmark,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satfuse",
        description="Multi-modal learner-satisfaction prediction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", required=True, help="run output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")
        if name == "report":
            p.add_argument("--top-k", type=int, default=20, dest="top_k")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            obj = json.load(f)
        if not isinstance(obj, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        if args.seed is not None:
            obj["seed"] = args.seed
        cfg = ExperimentConfig.from_json(obj)
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        _write_json(cfg.resolved(), out / CONFIG_FILE)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
