"""Behavioral feature extraction: temporal pooling, normalization, missingness.

Each record yields a vector of K_b normalized feature values, K_b missingness
indicators (1 exactly where the raw feature was absent, with the value slot
forced to 0), and a 3-way one-hot of completion status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .corpus import COMPLETION_STATES
from .errors import ConfigError, FormatError

SECONDS_PER_DAY = 86400.0
_COMPLETION_LEVEL = {name: float(i) for i, name in enumerate(COMPLETION_STATES)}

COMPLETION_FEATURE = "completion_level"


def pool_temporal(events, scheme: str = "exp_decay", now: int = 0,
                  decay_per_day: float = 0.05):
    """Collapse timestamped events to one scalar.

    ``weekly_mean`` averages per-ISO-week means; ``exp_decay`` weights each
    event by exp(-decay_per_day * age_in_days) relative to ``now``.  An empty
    event list is missing data and returns None, never zero.
    """
    events = list(events)
    if not events:
        return None
    if scheme == "weekly_mean":
        weeks = {}
        for ts, value in events:
            iso = datetime.fromtimestamp(ts, tz=timezone.utc).isocalendar()
            weeks.setdefault((iso[0], iso[1]), []).append(value)
        week_means = [sum(vals) / len(vals) for _, vals in sorted(weeks.items())]
        return sum(week_means) / len(week_means)
    if scheme == "exp_decay":
        if decay_per_day < 0:
            raise ValueError("decay_per_day must be >= 0")
        ages = [(now - ts) / SECONDS_PER_DAY for ts, _ in events]
        # Shift by the minimum age so the weights never all underflow to zero,
        # even for very large decay rates; the common factor cancels.
        min_age = min(ages)
        num = 0.0
        den = 0.0
        for age, (_, value) in zip(ages, events):
            w = math.exp(-decay_per_day * (age - min_age))
            num += w * value
            den += w
        return num / den
    raise ValueError(f"unknown pooling scheme {scheme!r}")


@dataclass
class FeatureSpec:
    """How one raw behavioral feature is pooled and normalized."""

    name: str
    scheme: str = "zscore"  # zscore | minmax
    pooling: str = "exp_decay"  # exp_decay | weekly_mean, for event lists
    decay_per_day: float = 0.05

    def __post_init__(self):
        if self.scheme not in ("zscore", "minmax"):
            raise ConfigError(f"feature {self.name!r}: unknown scheme {self.scheme!r}")
        if self.pooling not in ("exp_decay", "weekly_mean"):
            raise ConfigError(f"feature {self.name!r}: unknown pooling {self.pooling!r}")


@dataclass
class BehaviorSchema:
    """Raw event/scalar features plus the always-present completion level.

    Completion status doubles as an ordinal numeric feature (0, 1, 2) and as
    the trailing one-hot block.
    """

    features: list = field(default_factory=lambda: [
        FeatureSpec("viewing_duration", "zscore"),
        FeatureSpec("quiz_attempts", "zscore"),
        FeatureSpec("forum_posts", "zscore"),
        FeatureSpec("revisit_count", "zscore"),
    ])
    completion_scheme: str = "minmax"

    def all_specs(self) -> list:
        return list(self.features) + [
            FeatureSpec(COMPLETION_FEATURE, self.completion_scheme)
        ]

    def raw_feature_names(self) -> list:
        return [f.name for f in self.features]

    def dim(self) -> int:
        k_b = len(self.features) + 1
        return 2 * k_b + len(COMPLETION_STATES)

    def column_names(self) -> list:
        names = [f.name for f in self.all_specs()]
        cols = [f"beh_{n}" for n in names]
        cols += [f"beh_missing_{n}" for n in names]
        cols += [f"beh_completion_{s}" for s in COMPLETION_STATES]
        return cols


def raw_feature_value(record, spec: FeatureSpec):
    """Pooled scalar for one feature of one record, or None when missing."""
    if spec.name == COMPLETION_FEATURE:
        if record.completion is None:
            return None
        return _COMPLETION_LEVEL[record.completion]
    val = record.behavior_raw.get(spec.name)
    if val is None:
        return None
    if isinstance(val, list):
        return pool_temporal(val, scheme=spec.pooling, now=record.timestamp,
                             decay_per_day=spec.decay_per_day)
    return float(val)


@dataclass
class FeatureStats:
    scheme: str
    mean: float
    std: float  # population standard deviation
    min: float
    max: float
    count: int


class NormStats:
    """Fitted normalization statistics, computed on training data only."""

    def __init__(self, schema: BehaviorSchema, stats: dict):
        self.schema = schema
        self.stats = stats  # name -> FeatureStats

    def to_json(self) -> dict:
        return {
            "version": 1,
            "features": [
                {
                    "name": f.name,
                    "scheme": f.scheme,
                    "pooling": f.pooling,
                    "decay_per_day": f.decay_per_day,
                }
                for f in self.schema.features
            ],
            "completion_scheme": self.schema.completion_scheme,
            "stats": {
                name: {
                    "scheme": s.scheme,
                    "mean": s.mean,
                    "std": s.std,
                    "min": s.min,
                    "max": s.max,
                    "count": s.count,
                }
                for name, s in sorted(self.stats.items())
            },
        }

    @classmethod
    def from_json(cls, obj) -> "NormStats":
        if obj.get("version") != 1:
            raise FormatError("unsupported norm-stats version")
        schema = BehaviorSchema(
            features=[
                FeatureSpec(f["name"], f["scheme"], f["pooling"], f["decay_per_day"])
                for f in obj["features"]
            ],
            completion_scheme=obj["completion_scheme"],
        )
        stats = {
            name: FeatureStats(
                scheme=s["scheme"], mean=s["mean"], std=s["std"],
                min=s["min"], max=s["max"], count=s["count"],
            )
            for name, s in obj["stats"].items()
        }
        return cls(schema, stats)


def fit_norm_stats(train, schema: BehaviorSchema | None = None) -> NormStats:
    """Population statistics per feature over non-missing training values.

    Validation and test records must never reach this function.
    """
    schema = schema or BehaviorSchema()
    stats = {}
    for spec in schema.all_specs():
        values = []
        for rec in train:
            v = raw_feature_value(rec, spec)
            if v is not None:
                values.append(v)
        if not values:
            raise ConfigError(
                f"behavioral feature {spec.name!r} has no non-missing training values"
            )
        arr = np.asarray(values, dtype=np.float64)
        stats[spec.name] = FeatureStats(
            scheme=spec.scheme,
            mean=float(arr.mean()),
            std=float(arr.std()),  # population (divide by N)
            min=float(arr.min()),
            max=float(arr.max()),
            count=len(values),
        )
    return NormStats(schema, stats)


@dataclass
class BehaviorVector:
    """Normalized feature values, missingness indicators, completion one-hot."""

    values: np.ndarray
    feature_names: list

    @property
    def dim(self):
        return len(self.values)


def _normalize_value(x: float, s: FeatureStats) -> float:
    if s.scheme == "zscore":
        if s.std == 0.0:
            return 0.0
        return (x - s.mean) / s.std
    if s.scheme == "minmax":
        if s.max == s.min:
            return 0.0
        return min(1.0, max(0.0, (x - s.min) / (s.max - s.min)))
    raise ValueError(f"unknown scheme {s.scheme!r}")


def normalize(record, norm_stats: NormStats) -> BehaviorVector:
    """Apply the fitted normalization to one record.

    Missing features produce a 0 value slot with indicator 1; min-max outputs
    are clipped to [0, 1] for out-of-range non-training values.
    """
    schema = norm_stats.schema
    specs = schema.all_specs()
    vals = np.zeros(len(specs))
    indicators = np.zeros(len(specs))
    for i, spec in enumerate(specs):
        raw = raw_feature_value(record, spec)
        if raw is None:
            indicators[i] = 1.0
        else:
            vals[i] = _normalize_value(raw, norm_stats.stats[spec.name])
    onehot = np.zeros(len(COMPLETION_STATES))
    if record.completion is not None:
        onehot[COMPLETION_STATES.index(record.completion)] = 1.0
    return BehaviorVector(
        values=np.concatenate([vals, indicators, onehot]),
        feature_names=schema.column_names(),
    )
