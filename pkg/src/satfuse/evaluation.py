"""Metrics, the model-comparison benchmark, the ablation harness, and reports.

The benchmark trains every configured backbone on the full fused
representation next to three single-modality baselines (bag-of-words,
topic-only, and sentiment-only linear models).  The ablation harness drops
one segment at a time from a shared design matrix so every variant is paired
on identical reviews, splits, and seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import build_vocab, tokenize_terms
from .errors import PipelineError
from .fusion import SEGMENTS, restrict
from .pipeline import Artifacts
from .regress import RegressorSpec, predict, train

_CELL_FAILURES = (PipelineError, ValueError, FloatingPointError, np.linalg.LinAlgError)

CLAMP_RANGE = (1.0, 5.0)


def _check_pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise PipelineError(f"paired vectors must match: {y.shape} vs {y_hat.shape}")
    if len(y) == 0:
        raise PipelineError("cannot score empty vectors")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise PipelineError("non-finite entries in metric inputs")
    return y, y_hat


def rmse(y, y_hat) -> float:
    y, y_hat = _check_pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def mae(y, y_hat) -> float:
    y, y_hat = _check_pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class EvalRow:
    name: str
    backbone: str
    mask: list
    rmse: float | None = None
    mae: float | None = None
    n_test: int = 0
    seed: int | None = None
    params: dict = field(default_factory=dict)
    delta_rmse: float | None = None  # vs the full row, ablation reports only
    ref_rmse: float | None = None  # operator-supplied context value
    status: str = "ok"

    def to_json(self) -> dict:
        return {
            "name": self.name, "backbone": self.backbone, "mask": list(self.mask),
            "rmse": self.rmse, "mae": self.mae, "n_test": self.n_test,
            "seed": self.seed, "params": self.params,
            "delta_rmse": self.delta_rmse, "ref_rmse": self.ref_rmse,
            "status": self.status,
        }


@dataclass
class EvalReport:
    kind: str
    rows: list
    context: dict = field(default_factory=dict)

    def row(self, name) -> EvalRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(f"no report row named {name!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "rows": [r.to_json() for r in self.rows],
                "context": self.context}

    def render_text(self) -> str:
        headers = ["name", "backbone", "mask", "rmse", "mae", "delta", "ref", "n", "status"]
        lines = [headers]
        for r in self.rows:
            lines.append([
                r.name, r.backbone, "+".join(r.mask) if r.mask else "-",
                f"{r.rmse:.4f}" if r.rmse is not None else "-",
                f"{r.mae:.4f}" if r.mae is not None else "-",
                f"{r.delta_rmse:+.4f}" if r.delta_rmse is not None else "-",
                f"{r.ref_rmse:.3f}" if r.ref_rmse is not None else "-",
                str(r.n_test), r.status,
            ])
        widths = [max(len(row[i]) for row in lines) for i in range(len(headers))]
        out = []
        for j, row in enumerate(lines):
            out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if j == 0:
                out.append("  ".join("-" * w for w in widths))
        ctx = self.context
        if ctx:
            out.append("")
            out.append("context: " + json.dumps(ctx, sort_keys=True))
        return "\n".join(out) + "\n"


def _finish_row(row: EvalRow, y, y_hat):
    row.rmse = rmse(y, y_hat)
    row.mae = mae(y, y_hat)
    row.n_test = len(y)
    if row.rmse < row.mae - 1e-12:
        raise PipelineError(f"row {row.name}: rmse {row.rmse} below mae {row.mae}")
    return row


# ---------------------------------------------------------------------------
# Bag-of-words baseline featurizer (benchmark-only)
# ---------------------------------------------------------------------------

class BowFeaturizer:
    """Log-scaled term frequencies weighted by inverse document frequency."""

    def __init__(self, min_doc_freq: int = 2, stopwords=None):
        self.min_doc_freq = min_doc_freq
        self.stopwords = stopwords
        self.vocab = None
        self.idf = None

    def fit(self, records) -> "BowFeaturizer":
        self.vocab = build_vocab(records, min_doc_freq=self.min_doc_freq,
                                 stopwords=self.stopwords)
        n_docs = len(records)
        self.idf = np.empty(len(self.vocab))
        for term, idx in self.vocab.term_to_index.items():
            df = self.vocab.doc_freq[term]
            self.idf[idx] = math.log((1.0 + n_docs) / (1.0 + df)) + 1.0
        return self

    def transform(self, records) -> np.ndarray:
        X = np.zeros((len(records), len(self.vocab)))
        for i, rec in enumerate(records):
            for term in tokenize_terms(rec.text, self.stopwords):
                idx = self.vocab.term_to_index.get(term)
                if idx is not None:
                    X[i, idx] += 1.0
        np.log1p(X, out=X)
        X *= self.idf
        return X


# ---------------------------------------------------------------------------
# Benchmark and ablation cells
# ---------------------------------------------------------------------------

def _cell(spec: RegressorSpec, mask, artifacts: Artifacts, clamp: bool):
    d_train = restrict(artifacts.design_train, mask)
    d_val = restrict(artifacts.design_val, mask)
    d_test = restrict(artifacts.design_test, mask)
    model = train(spec, d_train.X, d_train.y, val=(d_val.X, d_val.y))
    y_hat = predict(model, d_test.X, clamp=CLAMP_RANGE if clamp else None)
    return model, d_test.y, y_hat


def _mask_label(mask) -> str:
    mask = tuple(mask)
    if mask == SEGMENTS:
        return "full"
    missing = [s for s in SEGMENTS if s not in mask]
    if len(missing) == 1:
        return f"-{missing[0]}"
    return "+".join(mask)


def run_benchmark(artifacts: Artifacts, backbones, *, clamp: bool = False,
                  min_doc_freq: int = 2, stopwords=None,
                  reference_rmse: dict | None = None) -> EvalReport:
    """Comparison table: single-modality baselines plus every configured
    backbone on the full fused representation.

    A failing backbone marks its row and the run continues.
    """
    reference_rmse = reference_rmse or {}
    rows = []

    rows.append(_bow_row(artifacts, min_doc_freq, stopwords, clamp))
    for name, mask in (("topic_linear", ("topic",)),
                       ("sentiment_linear", ("sentiment",))):
        spec = RegressorSpec(backbone="linear")
        row = EvalRow(name=name, backbone="linear", mask=list(mask),
                      seed=spec.seed, params=dict(spec.params))
        try:
            _, y, y_hat = _cell(spec, mask, artifacts, clamp)
            _finish_row(row, y, y_hat)
        except PipelineError as e:
            row.status = f"failed: {e}"
        rows.append(row)

    for name, spec in backbones:
        row = EvalRow(name=name, backbone=spec.backbone, mask=list(SEGMENTS),
                      seed=spec.seed, params=dict(spec.params))
        try:
            _, y, y_hat = _cell(spec, SEGMENTS, artifacts, clamp)
            _finish_row(row, y, y_hat)
        except PipelineError as e:
            row.status = f"failed: {e}"
        rows.append(row)

    for row in rows:
        if row.name in reference_rmse:
            row.ref_rmse = float(reference_rmse[row.name])

    return EvalReport(kind="benchmark", rows=rows, context=_context(artifacts))


def _bow_row(artifacts, min_doc_freq, stopwords, clamp) -> EvalRow:
    spec = RegressorSpec(backbone="linear")
    row = EvalRow(name="bow_linear", backbone="linear", mask=[],
                  seed=spec.seed, params=dict(spec.params))
    try:
        by_id = {r.id: r for part in (artifacts.split.train, artifacts.split.val,
                                      artifacts.split.test) for r in part}
        train_recs = [by_id[i] for i in artifacts.design_train.ids]
        test_recs = [by_id[i] for i in artifacts.design_test.ids]
        feats = BowFeaturizer(min_doc_freq=min_doc_freq, stopwords=stopwords).fit(train_recs)
        model = train(spec, feats.transform(train_recs), artifacts.design_train.y)
        y_hat = predict(model, feats.transform(test_recs),
                        clamp=CLAMP_RANGE if clamp else None)
        _finish_row(row, artifacts.design_test.y, y_hat)
    except _CELL_FAILURES as e:
        row.status = f"failed: {e}"
    return row


def run_ablation(artifacts: Artifacts, spec: RegressorSpec, masks=None, *,
                 clamp: bool = False) -> EvalReport:
    """One backbone under segment-removal masks, sharing splits and seeds.

    The delta column reports each variant's RMSE minus the full row's.
    """
    if masks is None:
        masks = [SEGMENTS] + [tuple(s for s in SEGMENTS if s != drop)
                              for drop in SEGMENTS]
    masks = [tuple(m) for m in masks]
    if SEGMENTS not in masks:
        masks = [SEGMENTS] + masks

    rows = []
    full_rmse = None
    for mask in masks:
        row = EvalRow(name=_mask_label(mask), backbone=spec.backbone,
                      mask=list(mask), seed=spec.seed, params=dict(spec.params))
        try:
            _, y, y_hat = _cell(spec, mask, artifacts, clamp)
            _finish_row(row, y, y_hat)
            if mask == SEGMENTS:
                full_rmse = row.rmse
        except PipelineError as e:
            row.status = f"failed: {e}"
        rows.append(row)
    for row in rows:
        if row.status == "ok" and full_rmse is not None:
            row.delta_rmse = row.rmse - full_rmse
    return EvalReport(kind="ablation", rows=rows, context=_context(artifacts))


def domain_breakdown(artifacts: Artifacts, backbones, *, min_group: int = 30,
                     clamp: bool = False) -> EvalReport:
    """Per-domain test metrics and the cross-domain spread per backbone.

    Domains with fewer than ``min_group`` test rows are excluded with a note.
    """
    domain_of = {r.id: r.domain_tag for r in artifacts.split.test}
    test_ids = artifacts.design_test.ids
    groups = {}
    for i, rid in enumerate(test_ids):
        groups.setdefault(domain_of[rid], []).append(i)

    rows = []
    for name, spec in backbones:
        try:
            _, y, y_hat = _cell(spec, SEGMENTS, artifacts, clamp)
        except _CELL_FAILURES as e:
            rows.append(EvalRow(name=f"{name}", backbone=spec.backbone,
                                mask=list(SEGMENTS), status=f"failed: {e}"))
            continue
        per_domain = []
        for domain in sorted(groups):
            idx = np.asarray(groups[domain])
            row = EvalRow(name=f"{name}/{domain}", backbone=spec.backbone,
                          mask=list(SEGMENTS), seed=spec.seed)
            if len(idx) < min_group:
                row.status = f"excluded: {len(idx)} rows below floor {min_group}"
            else:
                _finish_row(row, y[idx], y_hat[idx])
                per_domain.append(row.rmse)
            rows.append(row)
        spread = EvalRow(name=f"{name}/spread", backbone=spec.backbone,
                         mask=list(SEGMENTS), seed=spec.seed)
        if len(per_domain) >= 2:
            spread.rmse = max(per_domain) - min(per_domain)
            spread.mae = float(np.std(per_domain))
            spread.n_test = len(per_domain)
            spread.status = "ok (rmse=max-min, mae=std over domains)"
        else:
            spread.status = "excluded: fewer than 2 domains above floor"
        rows.append(spread)
    return EvalReport(kind="domains", rows=rows, context=_context(artifacts))


def top_errors(trained, design, k: int, dataset=None, *, clamp: bool = False) -> list:
    """The k largest absolute test errors with per-segment context.

    Ties are broken by review id; k larger than the matrix returns every row.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    y_hat = predict(trained, design.X, clamp=CLAMP_RANGE if clamp else None)
    errors = np.abs(design.y - y_hat)
    order = sorted(range(design.n), key=lambda i: (-errors[i], design.ids[i]))
    text_of = {r.id: r.text for r in dataset} if dataset is not None else {}
    out = []
    for i in order[:min(k, design.n)]:
        item = {
            "id": design.ids[i],
            "y": float(design.y[i]),
            "y_hat": float(y_hat[i]),
            "abs_error": float(errors[i]),
        }
        if "topic" in design.offsets:
            s, e = design.offsets["topic"]
            item["theta"] = [float(v) for v in design.X[i, s:e]]
        if "behavior" in design.offsets:
            s, e = design.offsets["behavior"]
            names = design.column_names[s:e]
            item["behavior"] = {n: float(v) for n, v in zip(names, design.X[i, s:e])}
        text = text_of.get(design.ids[i])
        if text is not None:
            item["text"] = text[:120]
        out.append(item)
    return out


def _context(artifacts: Artifacts) -> dict:
    return {
        "n_train": artifacts.design_train.n,
        "n_val": artifacts.design_val.n,
        "n_test": artifacts.design_test.n,
        "p_full": artifacts.design_train.p,
        "dropped": {
            "train": len(artifacts.design_train.dropped),
            "val": len(artifacts.design_val.dropped),
            "test": len(artifacts.design_test.dropped),
        },
    }


# ---------------------------------------------------------------------------
# Configured run assertions (CLI exit code 3)
# ---------------------------------------------------------------------------

def check_benchmark_ordering(report: EvalReport, best: str = "mlp",
                             min_gap: float = 0.02) -> list:
    """Expect best multi-modal < sentiment-only linear < bag-of-words linear."""
    failures = []
    try:
        chain = [report.row(best), report.row("sentiment_linear"), report.row("bow_linear")]
    except KeyError as e:
        return [str(e)]
    for lo, hi in zip(chain, chain[1:]):
        if lo.status != "ok" or hi.status != "ok":
            failures.append(f"rows {lo.name}/{hi.name} not ok")
        elif not (lo.rmse < hi.rmse - min_gap):
            failures.append(
                f"expected {lo.name} rmse + {min_gap} < {hi.name} rmse, "
                f"got {lo.rmse:.4f} vs {hi.rmse:.4f}"
            )
    return failures


def check_ablation_ordering(report: EvalReport) -> list:
    """Expect full < -behavior < -topic < -sentiment on RMSE."""
    failures = []
    try:
        chain = [report.row("full"), report.row("-behavior"),
                 report.row("-topic"), report.row("-sentiment")]
    except KeyError as e:
        return [str(e)]
    for lo, hi in zip(chain, chain[1:]):
        if lo.status != "ok" or hi.status != "ok":
            failures.append(f"rows {lo.name}/{hi.name} not ok")
        elif not (lo.rmse < hi.rmse):
            failures.append(
                f"expected {lo.name} rmse < {hi.name} rmse, "
                f"got {lo.rmse:.4f} vs {hi.rmse:.4f}"
            )
    return failures
