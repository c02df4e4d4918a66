"""Fused per-review vectors and stacked design matrices.

A fused vector concatenates the topic distribution, the sentiment embedding,
and the behavioral vector in that fixed order, skipping whichever segments an
ablation mask excludes.  No cross-modal scaling happens here; backbones that
need standardized inputs handle it internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .behavior import normalize
from .corpus import tokenize_dataset
from .errors import PipelineError
from .topics import infer_theta

SEGMENTS = ("topic", "sentiment", "behavior")


def normalize_mask(mask) -> tuple:
    """Canonical segment order, rejecting unknown segment names."""
    mask_set = set(mask)
    unknown = mask_set - set(SEGMENTS)
    if unknown:
        raise PipelineError(f"unknown mask segments {sorted(unknown)}")
    if not mask_set:
        raise PipelineError("mask must include at least one segment")
    return tuple(s for s in SEGMENTS if s in mask_set)


@dataclass
class FusedVector:
    z: np.ndarray
    offsets: dict  # segment -> (start, end), contiguous and exhaustive

    def segment(self, name) -> np.ndarray:
        start, end = self.offsets[name]
        return self.z[start:end]


def fuse(theta=None, h=None, b=None, mask=SEGMENTS) -> FusedVector:
    """Concatenate the unmasked segments in (topic, sentiment, behavior) order."""
    mask = normalize_mask(mask)
    sources = {"topic": theta, "sentiment": h, "behavior": b}
    parts = []
    offsets = {}
    pos = 0
    for name in mask:
        src = sources[name]
        if src is None:
            raise PipelineError(f"mask includes {name!r} but no {name} input was given")
        vec = np.asarray(getattr(src, "theta", getattr(src, "values", src)), dtype=np.float64)
        if vec.ndim != 1:
            raise PipelineError(f"{name} segment must be a vector")
        parts.append(vec)
        offsets[name] = (pos, pos + len(vec))
        pos += len(vec)
    return FusedVector(z=np.concatenate(parts), offsets=offsets)


@dataclass
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    ids: list
    mask: tuple
    offsets: dict
    column_names: list
    dropped: list = field(default_factory=list)  # [{"id", "reason"}, ...]

    def __post_init__(self):
        if self.X.shape != (len(self.ids), len(self.column_names)):
            raise PipelineError("design matrix shape does not match ids/columns")
        if not np.all(np.isfinite(self.X)):
            raise PipelineError("design matrix contains non-finite entries")
        if len(self.y) and (self.y.min() < 1.0 or self.y.max() > 5.0):
            raise PipelineError("targets outside [1, 5]")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def restrict(design: DesignMatrix, mask) -> DesignMatrix:
    """Column-slice a design matrix down to a sub-mask.

    Rows are shared with the source matrix, which keeps ablation variants
    paired on exactly the same reviews.
    """
    mask = normalize_mask(mask)
    missing = [s for s in mask if s not in design.offsets]
    if missing:
        raise PipelineError(f"source matrix lacks segments {missing}")
    cols = []
    offsets = {}
    names = []
    pos = 0
    for name in mask:
        start, end = design.offsets[name]
        cols.append(design.X[:, start:end])
        names.extend(design.column_names[start:end])
        offsets[name] = (pos, pos + (end - start))
        pos += end - start
    return DesignMatrix(X=np.hstack(cols) if cols else design.X[:, :0],
                        y=design.y, ids=list(design.ids), mask=mask,
                        offsets=offsets, column_names=names,
                        dropped=list(design.dropped))


def assemble_matrix(dataset, vocab, topic_model, embedding_store, norm_stats,
                    mask=SEGMENTS, infer_iterations: int = 100,
                    infer_burn_in: int = 50, seed: int = 0,
                    max_drop_fraction: float = 0.1, stopwords=None) -> DesignMatrix:
    """One fused row per review, ordered by review id.

    Rows whose unmasked components cannot be resolved (review id absent from
    the embedding store) are dropped and reported; exceeding
    ``max_drop_fraction`` of the input is fatal.  Topic distributions are
    folded in with per-review seeds, so the values never depend on which
    other reviews are assembled alongside.
    """
    mask = normalize_mask(mask)
    records = sorted(dataset, key=lambda r: r.id)
    docs = {d.review_id: d for d in tokenize_dataset(records, vocab, stopwords=stopwords)}
    if "topic" in mask:
        topic_model.check_vocab(vocab)

    rows, ids, ys = [], [], []
    dropped = []
    column_names = None
    for rec in records:
        theta = h = b = None
        if "topic" in mask:
            theta = infer_theta(topic_model, docs[rec.id],
                                iterations=infer_iterations,
                                burn_in=infer_burn_in, seed=seed)
        if "sentiment" in mask:
            if rec.id not in embedding_store:
                dropped.append({"id": rec.id, "reason": "no embedding for review"})
                continue
            h = embedding_store.get(rec.id).astype(np.float64)
        if "behavior" in mask:
            b = normalize(rec, norm_stats)
        fused = fuse(theta=theta, h=h, b=b, mask=mask)
        rows.append(fused.z)
        ids.append(rec.id)
        ys.append(rec.rating)
        if column_names is None:
            column_names = _column_names(mask, fused, norm_stats)
            offsets = fused.offsets

    if dropped and len(dropped) > max_drop_fraction * len(records):
        raise PipelineError(
            f"{len(dropped)} of {len(records)} rows dropped, above the "
            f"{max_drop_fraction:.0%} threshold; first: {dropped[0]}"
        )
    if not rows:
        raise PipelineError("no rows survived assembly")

    return DesignMatrix(X=np.vstack(rows), y=np.asarray(ys, dtype=np.float64),
                        ids=ids, mask=mask, offsets=offsets,
                        column_names=column_names, dropped=dropped)


def _column_names(mask, fused: FusedVector, norm_stats) -> list:
    names = []
    for seg in mask:
        start, end = fused.offsets[seg]
        if seg == "topic":
            names.extend(f"topic_{k}" for k in range(end - start))
        elif seg == "sentiment":
            names.extend(f"sent_{j}" for j in range(end - start))
        else:
            names.extend(norm_stats.schema.column_names())
    return names


# ---------------------------------------------------------------------------
# Persistence and export
# ---------------------------------------------------------------------------

def save_design(design: DesignMatrix, prefix):
    """Write {prefix}.X.npy, {prefix}.y.npy and a JSON manifest."""
    np.save(f"{prefix}.X.npy", design.X)
    np.save(f"{prefix}.y.npy", design.y)
    manifest = {
        "version": 1,
        "ids": design.ids,
        "mask": list(design.mask),
        "offsets": {k: list(v) for k, v in design.offsets.items()},
        "column_names": design.column_names,
        "dropped": design.dropped,
    }
    with open(f"{prefix}.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True)
        f.write("\n")


def load_design(prefix) -> DesignMatrix:
    with open(f"{prefix}.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("version") != 1:
        raise PipelineError("unsupported design matrix version")
    return DesignMatrix(
        X=np.load(f"{prefix}.X.npy"),
        y=np.load(f"{prefix}.y.npy"),
        ids=manifest["ids"],
        mask=tuple(manifest["mask"]),
        offsets={k: tuple(v) for k, v in manifest["offsets"].items()},
        column_names=manifest["column_names"],
        dropped=manifest["dropped"],
    )


def export_csv(design: DesignMatrix, path):
    """Human-inspectable dump: id, rating, then segment-tagged columns."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(["id", "rating"] + design.column_names) + "\n")
        for i, rid in enumerate(design.ids):
            cells = [rid, repr(float(design.y[i]))]
            cells.extend(repr(float(v)) for v in design.X[i])
            f.write(",".join(cells) + "\n")
