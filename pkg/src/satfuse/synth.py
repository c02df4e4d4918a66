"""Planted-signal review generator for desk-scale experiments.

Ratings are a clipped affine combination of three standardized latent
signals -- a topic-valence score, a sentiment score expressed through
per-topic lexicons in the text, and a behavioral-intensity score expressed
through interaction logs -- plus Gaussian noise.  The latents are returned
alongside the dataset so oracle regressions can bound achievable error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import ReviewRecord
from .util import stable_seed

N_TOPICS = 6
DOMAINS = ("cs", "business", "humanities")

_SYLLABLES = [c + v for c in "bdklmnprstvz" for v in "aeiou"]

BASE_RATING = 3.0
_BASE_TS = 1_600_000_000


@dataclass
class SyntheticSpec:
    n_reviews: int = 5000
    n_courses: int = 25
    topic_weight: float = 0.5
    sentiment_weight: float = 0.9
    behavior_weight: float = 0.3
    noise_sigma: float = 0.3
    seed: int = 99
    n_filler_words: int = 1500
    mean_extra_tokens: float = 6.0  # doc length = 6 + Poisson(this)
    missing_rate: float = 0.1
    domain_noise: dict | None = None  # domain -> extra sigma, for robustness runs

    def __post_init__(self):
        weights = (self.topic_weight, self.sentiment_weight, self.behavior_weight)
        if any(w < 0 for w in weights):
            raise ValueError("signal weights must be >= 0")
        if all(w == 0 for w in weights) and self.noise_sigma == 0:
            raise ValueError("at least one signal weight or the noise must be positive")
        if self.n_reviews < 1 or self.n_courses < 1:
            raise ValueError("need at least one review and one course")


@dataclass
class SyntheticResult:
    dataset: list
    latents: dict  # review id -> {"topic", "sentiment", "behavior"} (standardized)
    lexicon: dict = field(default_factory=dict)


def _make_words(rng, count, taken, prefix_len=3):
    words = []
    while len(words) < count:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(prefix_len))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _build_lexicon(seed):
    rng = np.random.default_rng(stable_seed(seed, "lexicon"))
    taken = set()
    content = [_make_words(rng, 24, taken) for _ in range(N_TOPICS)]
    positive = [_make_words(rng, 8, taken) for _ in range(N_TOPICS)]
    negative = [_make_words(rng, 8, taken) for _ in range(N_TOPICS)]
    return {"content": content, "positive": positive, "negative": negative}


def _standardize(x):
    x = np.asarray(x, dtype=np.float64)
    sd = x.std()
    if sd == 0:
        return x - x.mean()
    return (x - x.mean()) / sd


def generate_synthetic(spec: SyntheticSpec) -> SyntheticResult:
    """Draw a dataset whose rating decomposes into known latent signals."""
    rng = np.random.default_rng(stable_seed(spec.seed, "reviews"))
    lexicon = _build_lexicon(spec.seed)
    fillers = _make_words(
        np.random.default_rng(stable_seed(spec.seed, "fillers")),
        spec.n_filler_words,
        set(w for group in lexicon.values() for words in group for w in words),
    )

    n = spec.n_reviews
    course_ids = [f"c{j:03d}" for j in range(spec.n_courses)]
    course_domain = {c: DOMAINS[j % len(DOMAINS)] for j, c in enumerate(course_ids)}
    course_profiles = rng.dirichlet(np.full(N_TOPICS, 0.7), size=spec.n_courses)
    valences = np.linspace(-1.0, 1.0, N_TOPICS)

    course_of = rng.integers(0, spec.n_courses, size=n)
    thetas = np.vstack([
        rng.dirichlet(8.0 * course_profiles[c] + 0.1) for c in course_of
    ])

    topic_latent = _standardize(thetas @ valences)
    sent_latent = _standardize(rng.standard_normal(n))
    beh_latent = _standardize(rng.standard_normal(n))
    noise = rng.standard_normal(n)

    records = []
    latents = {}
    for i in range(n):
        rid = f"r{i:05d}"
        course = course_ids[course_of[i]]
        domain = course_domain[course]
        ts = _BASE_TS + int(course_of[i]) * 90_000 + i * 137

        text = _draw_text(rng, spec, lexicon, fillers, thetas[i], sent_latent[i])
        behavior, completion = _draw_behavior(rng, spec, beh_latent[i], ts)

        sigma = spec.noise_sigma
        if spec.domain_noise and domain in spec.domain_noise:
            sigma = sigma + spec.domain_noise[domain]
        rating = (BASE_RATING
                  + spec.topic_weight * topic_latent[i]
                  + spec.sentiment_weight * sent_latent[i]
                  + spec.behavior_weight * beh_latent[i]
                  + sigma * noise[i])
        rating = float(np.clip(rating, 1.0, 5.0))

        records.append(ReviewRecord(
            id=rid, course_id=course, domain_tag=domain, text=text,
            rating=rating, timestamp=ts, behavior_raw=behavior,
            completion=completion,
        ))
        latents[rid] = {
            "topic": float(topic_latent[i]),
            "sentiment": float(sent_latent[i]),
            "behavior": float(beh_latent[i]),
        }
    return SyntheticResult(dataset=records, latents=latents, lexicon=lexicon)


def _draw_text(rng, spec, lexicon, fillers, theta, sent):
    length = 6 + rng.poisson(spec.mean_extra_tokens)
    prob_pos = float(np.clip(0.5 + 0.35 * sent, 0.05, 0.95))
    words = []
    for _ in range(length):
        r = rng.random()
        topic = int(rng.choice(N_TOPICS, p=theta))
        if r < 0.25:
            words.append(fillers[rng.integers(len(fillers))])
        elif r < 0.60:
            group = "positive" if rng.random() < prob_pos else "negative"
            words.append(lexicon[group][topic][rng.integers(8)])
        else:
            words.append(lexicon["content"][topic][rng.integers(24)])
    return " ".join(words)


def _draw_behavior(rng, spec, beh, review_ts):
    behavior = {}
    if rng.random() >= spec.missing_rate:
        n_events = 1 + rng.poisson(2)
        events = []
        for _ in range(n_events):
            ev_ts = review_ts - int(rng.integers(0, 42)) * 86_400
            value = max(5.0, 40.0 + 18.0 * beh + rng.normal(0.0, 6.0))
            events.append((ev_ts, float(value)))
        behavior["viewing_duration"] = events
    for name, base, slope in (("quiz_attempts", 2.5, 1.1),
                              ("forum_posts", 1.2, 0.7),
                              ("revisit_count", 1.8, 0.9)):
        if rng.random() >= spec.missing_rate:
            behavior[name] = float(rng.poisson(max(0.1, base + slope * beh)))
    completion = None
    if rng.random() >= spec.missing_rate:
        u = beh + rng.normal(0.0, 0.5)
        if u > 0.4:
            completion = "completed"
        elif u > -0.6:
            completion = "in_progress"
        else:
            completion = "not_started"
    return behavior, completion
