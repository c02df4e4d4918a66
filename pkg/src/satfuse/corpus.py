"""Review ingestion, tokenization, vocabulary construction, and dataset splits."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, FormatError, PipelineError

COMPLETION_STATES = ("not_started", "in_progress", "completed")

# Word characters minus underscore; \w is Unicode-aware in Python 3.
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass
class ReviewRecord:
    """One review: text, star rating in [1, 5], and raw behavioral signals.

    ``behavior_raw`` maps feature name to either a scalar or a list of
    ``(epoch_seconds, value)`` events.  A feature absent from the map is
    missing, which is distinct from zero.
    """

    id: str
    course_id: str
    domain_tag: str
    text: str
    rating: float
    timestamp: int
    behavior_raw: dict = field(default_factory=dict)
    completion: str | None = None


@dataclass
class TokenizedDoc:
    """A review reduced to vocabulary indices.  May be empty."""

    review_id: str
    tokens: list


@dataclass
class IngestResult:
    dataset: list
    rejects: list  # [{"line": int, "reason": str}, ...]


class Vocabulary:
    """Bijective term <-> index maps with document frequencies.

    Indices are contiguous from 0 and assigned in lexicographic term order so
    that construction is deterministic.
    """

    def __init__(self, terms, doc_freq):
        self.index_to_term = list(terms)
        self.term_to_index = {t: i for i, t in enumerate(self.index_to_term)}
        self.doc_freq = dict(doc_freq)
        if len(self.term_to_index) != len(self.index_to_term):
            raise ValueError("duplicate terms in vocabulary")

    def __len__(self):
        return len(self.index_to_term)

    def __contains__(self, term):
        return term in self.term_to_index

    def checksum(self) -> str:
        """Hex digest binding fitted models to this exact term/index map."""
        h = hashlib.sha256()
        for i, t in enumerate(self.index_to_term):
            h.update(f"{i}\t{t}\n".encode("utf-8"))
        return h.hexdigest()

    def to_json(self) -> dict:
        return {
            "version": 1,
            "terms": list(self.index_to_term),
            "doc_freq": {t: int(self.doc_freq.get(t, 0)) for t in self.index_to_term},
        }

    @classmethod
    def from_json(cls, obj) -> "Vocabulary":
        if obj.get("version") != 1:
            raise FormatError("unsupported vocabulary version")
        return cls(obj["terms"], obj["doc_freq"])


def load_stopwords(path=None) -> frozenset:
    """Load the stopword list, either the shipped default or an override file."""
    if path is None:
        text = resources.files("satfuse.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


_DEFAULT_STOPWORDS = None


def default_stopwords() -> frozenset:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def tokenize_terms(text: str, stopwords=None) -> list:
    """Lowercase, split on Unicode whitespace/punctuation, drop stopwords and
    digits-only tokens.  Empty output is legal for short reviews."""
    if stopwords is None:
        stopwords = default_stopwords()
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if tok.isdigit() or tok in stopwords:
            continue
        out.append(tok)
    return out


def tokenize(text: str, vocab: Vocabulary | None = None, mode: str = "build",
             stopwords=None, review_id: str = ""):
    """Tokenize one review.

    ``build`` mode returns the surviving terms (used while the vocabulary is
    being constructed); ``lookup`` mode returns a :class:`TokenizedDoc` of
    vocabulary indices, silently dropping out-of-vocabulary terms.
    """
    terms = tokenize_terms(text, stopwords)
    if mode == "build":
        return terms
    if mode == "lookup":
        if vocab is None:
            raise ValueError("lookup mode requires a vocabulary")
        idx = [vocab.term_to_index[t] for t in terms if t in vocab.term_to_index]
        return TokenizedDoc(review_id=review_id, tokens=idx)
    raise ValueError(f"unknown vocab_mode {mode!r}")


def build_vocab(dataset, min_doc_freq: int = 2, stopwords=None) -> Vocabulary:
    """Vocabulary of terms appearing in at least ``min_doc_freq`` distinct docs."""
    if min_doc_freq < 1:
        raise ValueError("min_doc_freq must be >= 1")
    df = Counter()
    for rec in dataset:
        df.update(set(tokenize_terms(rec.text, stopwords)))
    kept = sorted(t for t, c in df.items() if c >= min_doc_freq)
    if not kept:
        raise ConfigError(
            f"empty vocabulary: no term appears in >= {min_doc_freq} documents"
        )
    return Vocabulary(kept, {t: df[t] for t in kept})


def tokenize_dataset(dataset, vocab: Vocabulary, stopwords=None) -> list:
    """One TokenizedDoc per record, in dataset order."""
    return [
        tokenize(rec.text, vocab, mode="lookup", stopwords=stopwords, review_id=rec.id)
        for rec in dataset
    ]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _parse_behavior(obj):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise _RowReject("behavior must be an object")
    out = {}
    for name, val in obj.items():
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            out[name] = float(val)
        elif isinstance(val, list):
            events = []
            for ev in val:
                if (not isinstance(ev, list) or len(ev) != 2
                        or not isinstance(ev[0], (int, float))
                        or not isinstance(ev[1], (int, float))):
                    raise _RowReject(f"behavior feature {name!r}: events must be [ts, value] pairs")
                events.append((int(ev[0]), float(ev[1])))
            out[name] = events
        else:
            raise _RowReject(f"behavior feature {name!r}: expected number or event list")
    return out


class _RowReject(Exception):
    pass


def _validate_row(raw, seen_ids, behavior_keys):
    rid = raw.get("id")
    if rid is None or not isinstance(rid, str) or not rid:
        raise _RowReject("missing id")
    if rid in seen_ids:
        raise _RowReject(f"duplicate id {rid!r}")
    text = raw.get("text")
    if text is None or not isinstance(text, str):
        raise _RowReject("missing text")
    rating = raw.get("rating")
    if rating is None or isinstance(rating, bool) or not isinstance(rating, (int, float)):
        raise _RowReject("missing rating")
    rating = float(rating)
    if not (1.0 <= rating <= 5.0):
        raise _RowReject(f"rating {rating} outside [1, 5]")
    completion = raw.get("completion")
    if completion is not None and completion not in COMPLETION_STATES:
        raise _RowReject(f"invalid completion {completion!r}")
    behavior = _parse_behavior(raw.get("behavior"))
    if behavior_keys is not None:
        unknown = sorted(set(behavior) - set(behavior_keys))
        if unknown:
            raise _RowReject(f"behavior keys not in schema: {unknown}")
    ts = raw.get("ts", 0)
    if isinstance(ts, bool) or not isinstance(ts, (int, float)):
        raise _RowReject("invalid ts")
    return ReviewRecord(
        id=rid,
        course_id=str(raw.get("course_id", "")),
        domain_tag=str(raw.get("domain", "")),
        text=text,
        rating=rating,
        timestamp=int(ts),
        behavior_raw=behavior,
        completion=completion,
    )


def _iter_jsonl_rows(path):
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}: malformed JSON at line {line_no}: {e}") from e


def _csv_row_to_raw(row):
    """Convert one CSV row to the JSONL-shaped dict; raises _RowReject on
    unparseable numerics."""
    raw = {
        "id": row.get("id") or None,
        "course_id": row.get("course_id", ""),
        "domain": row.get("domain", ""),
        "text": row.get("text"),
    }
    rating = row.get("rating")
    if rating is None or rating == "":
        raw["rating"] = None
    else:
        try:
            raw["rating"] = float(rating)
        except ValueError:
            raise _RowReject(f"unparseable rating {rating!r}")
    ts = row.get("ts")
    if ts is None or ts == "":
        raw["ts"] = 0
    else:
        try:
            raw["ts"] = int(float(ts))
        except ValueError:
            raise _RowReject(f"unparseable ts {ts!r}")
    if row.get("completion"):
        raw["completion"] = row["completion"]
    behavior = {}
    for col, val in row.items():
        if not col or not col.startswith("beh.") or val is None or val == "":
            continue  # absent scalar stays missing, never zero
        try:
            behavior[col[len("beh."):]] = float(val)
        except ValueError:
            raise _RowReject(f"unparseable value for {col}: {val!r}")
    raw["behavior"] = behavior
    return raw


def _iter_csv_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty CSV file")
        required = {"id", "text", "rating"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise FormatError(f"{path}: CSV header missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                yield line_no, _csv_row_to_raw(row)
            except _RowReject as e:
                yield line_no, e


def ingest_reviews(path, format: str = "jsonl", behavior_keys=None) -> IngestResult:
    """Parse a review file into records, rejecting invalid rows individually.

    A malformed file (bad JSON, missing CSV header) is fatal; a row that fails
    validation (missing text/rating, rating out of range, duplicate id) is
    dropped and reported in ``rejects``.
    """
    if format == "jsonl":
        rows = _iter_jsonl_rows(path)
    elif format == "csv":
        rows = _iter_csv_rows(path)
    else:
        raise ValueError(f"unknown format {format!r}")

    records, rejects = [], []
    seen = set()
    for line_no, raw in rows:
        try:
            if isinstance(raw, _RowReject):
                raise raw
            rec = _validate_row(raw, seen, behavior_keys)
        except _RowReject as e:
            rejects.append({"line": line_no, "reason": str(e)})
            continue
        seen.add(rec.id)
        records.append(rec)
    return IngestResult(dataset=records, rejects=rejects)


def record_to_json(rec: ReviewRecord) -> dict:
    behavior = {}
    for name in sorted(rec.behavior_raw):
        val = rec.behavior_raw[name]
        if isinstance(val, list):
            behavior[name] = [[int(ts), float(v)] for ts, v in val]
        else:
            behavior[name] = float(val)
    obj = {
        "id": rec.id,
        "course_id": rec.course_id,
        "domain": rec.domain_tag,
        "text": rec.text,
        "rating": rec.rating,
        "ts": rec.timestamp,
        "behavior": behavior,
    }
    if rec.completion is not None:
        obj["completion"] = rec.completion
    return obj


def write_reviews_jsonl(dataset, path):
    """Serialize records so that ingest(write(ingest(x))) == ingest(x)."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in dataset:
            f.write(json.dumps(record_to_json(rec), ensure_ascii=False))
            f.write("\n")


def write_reject_report(rejects, path):
    with open(path, "w", encoding="utf-8") as f:
        for item in rejects:
            f.write(json.dumps({"line": item["line"], "reason": item["reason"]}))
            f.write("\n")


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list

    def ids(self) -> dict:
        return {
            "train": [r.id for r in self.train],
            "val": [r.id for r in self.val],
            "test": [r.id for r in self.test],
        }


def _largest_remainder(n: int, ratios) -> list:
    exact = [n * r for r in ratios]
    base = [math.floor(e) for e in exact]
    short = n - sum(base)
    # Distribute leftovers by descending fractional part; ties to earlier split.
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_dataset(dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    """Deterministic train/val/test partition, stratified by course where
    course group sizes permit.

    Global split sizes follow largest-remainder rounding of ``len(dataset) *
    ratios``; per-course allocations are balanced afterwards so the global
    sizes are met exactly.
    """
    if len(dataset) < 3:
        raise PipelineError(f"dataset has {len(dataset)} records; need at least 3 to split")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive reals")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios sum to {sum(ratios)}, expected 1")

    n = len(dataset)
    targets = _largest_remainder(n, ratios)

    courses = {}
    for rec in dataset:
        courses.setdefault(rec.course_id, []).append(rec)

    rng = np.random.default_rng(seed)
    assigned = [[], [], []]  # per split, lists of records
    for course_id in sorted(courses):
        members = sorted(courses[course_id], key=lambda r: r.id)
        perm = rng.permutation(len(members))
        members = [members[i] for i in perm]
        counts = _largest_remainder(len(members), ratios)
        pos = 0
        for s in range(3):
            assigned[s].extend(members[pos:pos + counts[s]])
            pos += counts[s]

    # Per-course rounding can drift from the global targets; move single
    # records from overfull to underfull splits, always from the end of the
    # overfull split's assignment order (deterministic).
    for s in range(3):
        while len(assigned[s]) > targets[s]:
            dst = min(
                (t for t in range(3) if len(assigned[t]) < targets[t]),
                key=lambda t: (len(assigned[t]) - targets[t], t),
            )
            assigned[dst].append(assigned[s].pop())

    return DatasetSplit(train=assigned[0], val=assigned[1], test=assigned[2])
