import numpy as np
import pytest

from satfuse.corpus import COMPLETION_STATES
from satfuse.evaluation import rmse
from satfuse.regress import fit_linear
from satfuse.synth import BASE_RATING, SyntheticSpec, generate_synthetic


def test_deterministic_given_seed():
    spec = SyntheticSpec(n_reviews=60, n_courses=4, seed=5)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    assert a.dataset == b.dataset
    assert a.latents == b.latents


def test_structure_and_ranges():
    result = generate_synthetic(SyntheticSpec(n_reviews=150, n_courses=6, seed=1))
    ids = [r.id for r in result.dataset]
    assert len(set(ids)) == 150
    allowed = {"viewing_duration", "quiz_attempts", "forum_posts", "revisit_count"}
    for rec in result.dataset:
        assert 1.0 <= rec.rating <= 5.0
        assert set(rec.behavior_raw) <= allowed
        assert rec.completion is None or rec.completion in COMPLETION_STATES
        assert rec.text
    assert set(result.latents) == set(ids)


def test_zero_noise_sentiment_only_is_deterministic_function():
    spec = SyntheticSpec(n_reviews=120, n_courses=5, topic_weight=0.0,
                         sentiment_weight=0.8, behavior_weight=0.0,
                         noise_sigma=0.0, seed=9)
    result = generate_synthetic(spec)
    for rec in result.dataset:
        s = result.latents[rec.id]["sentiment"]
        expected = float(np.clip(BASE_RATING + 0.8 * s, 1.0, 5.0))
        assert rec.rating == pytest.approx(expected, abs=1e-12)


def test_pure_noise_defeats_every_latent():
    spec = SyntheticSpec(n_reviews=1200, n_courses=8, topic_weight=0.0,
                         sentiment_weight=0.0, behavior_weight=0.0,
                         noise_sigma=0.5, seed=10)
    result = generate_synthetic(spec)
    y = np.array([r.rating for r in result.dataset])
    X = np.array([[result.latents[r.id]["topic"],
                   result.latents[r.id]["sentiment"],
                   result.latents[r.id]["behavior"]] for r in result.dataset])
    model = fit_linear(X, y)
    # Even the true latents cannot beat the mean by more than sampling error.
    assert rmse(y, model.predict(X)) > 0.95 * y.std()


def test_oracle_regression_reaches_noise_floor():
    spec = SyntheticSpec()  # defaults: n=5000, all signals planted
    result = generate_synthetic(spec)
    y = np.array([r.rating for r in result.dataset])
    X = np.array([[result.latents[r.id]["topic"],
                   result.latents[r.id]["sentiment"],
                   result.latents[r.id]["behavior"]] for r in result.dataset])
    model = fit_linear(X, y)
    assert rmse(y, model.predict(X)) <= spec.noise_sigma + 0.05


def test_domain_noise_override():
    spec = SyntheticSpec(n_reviews=300, n_courses=9, seed=3,
                         domain_noise={"cs": 0.0, "business": 1.0})
    result = generate_synthetic(spec)
    domains = {r.domain_tag for r in result.dataset}
    assert domains == {"cs", "business", "humanities"}


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        SyntheticSpec(topic_weight=-0.1)
    with pytest.raises(ValueError):
        SyntheticSpec(topic_weight=0.0, sentiment_weight=0.0,
                      behavior_weight=0.0, noise_sigma=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(n_reviews=0)
