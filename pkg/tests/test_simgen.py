"""Tests for the simulation generators."""

import numpy as np
import pytest

from src.constants import BETA
from src.exceptions import ConfigError
from src.simgen import (SimConfig, gen_observation, gen_outcome, gen_visits_renewal,
                        gen_visits_threshold, generate, population_threshold, simulate)


def test_case_1_1_regular_schedule():
    """Every subject visits at 6, 12, ..., 60."""
    dataset = generate(SimConfig.default("1-1", n_subjects=20, seed=1))
    assert dataset.n_events == 200
    np.testing.assert_array_equal(dataset.visit_counts(), np.full(20, 10))
    np.testing.assert_allclose(dataset.event_times[:10], 6.0 * np.arange(1, 11))
    assert dataset.event_recorded.all()


def test_generation_is_deterministic():
    config = SimConfig.default("2-3", n_subjects=30, seed=7)
    assert generate(config) == generate(config)
    assert not generate(config, replicate=1) == generate(config)


def test_subject_streams_are_independent_of_n():
    """Adding subjects leaves the earlier ones unchanged."""
    small = generate(SimConfig.default("1-2", n_subjects=5, seed=3))
    large = generate(SimConfig.default("1-2", n_subjects=8, seed=3))
    keep = large.event_subject_index < 5
    np.testing.assert_array_equal(small.event_times, large.event_times[keep])
    np.testing.assert_array_equal(small.covariates, large.covariates[:5])


def test_non_informative_recording_fraction():
    """alpha = 0 records each visit with probability one half."""
    dataset = generate(SimConfig.default("2-1", n_subjects=300, seed=2))
    fraction = dataset.event_recorded.mean()
    assert abs(fraction - 0.5) < 4 * np.sqrt(0.25 / dataset.n_events)


def test_renewal_mean_count():
    """A Poisson process of rate 0.1 on (0, 60] has mean count 6."""
    rng = np.random.default_rng(0)
    counts = np.array([len(gen_visits_renewal(rng, 0.1, 0.0, 60.0)[0]) for _ in range(10000)])
    assert abs(counts.mean() - 6.0) < 4 * np.sqrt(6.0 / 10000)


def test_renewal_vanishing_rate():
    times, _ = gen_visits_renewal(np.random.default_rng(0), 1e-12, 0.0, 60.0)
    assert len(times) == 0


def test_renewal_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        gen_visits_renewal(np.random.default_rng(0), 0.0, 0.0, 60.0)


def test_threshold_visits():
    """No visits below the threshold; a path always above visits at every grid point."""
    rng = np.random.default_rng(0)
    times, _ = gen_visits_threshold(rng, lambda t: np.full(len(t), -100.0), 1.0, 0.0,
                                    0.0, 60.0, 0.1)
    assert len(times) == 0
    coarse, values = gen_visits_threshold(rng, lambda t: np.full(len(t), 5.0), 0.0, 0.0,
                                          0.0, 60.0, 0.1)
    fine, _ = gen_visits_threshold(rng, lambda t: np.full(len(t), 5.0), 0.0, 0.0,
                                   0.0, 60.0, 0.05)
    assert len(coarse) == 600
    assert len(fine) == 2 * len(coarse)
    np.testing.assert_array_equal(values, 5.0)


def test_threshold_case_visit_fraction():
    """The population quantile puts about 20% of grid points above the threshold."""
    config = SimConfig.default("1-5", n_subjects=500, seed=4)
    dataset = generate(config)
    fraction = dataset.n_events / (config.n_subjects * 600)
    assert abs(fraction - 0.2) < 0.05
    assert simulate(config).threshold == population_threshold(config)


def test_noise_free_outcome():
    y = gen_outcome(np.random.default_rng(0), np.array([10.0]), 1.0, 0.0, np.zeros(2), BETA, 0.0)
    assert y[0] == pytest.approx(-1.5)


def test_observation_probability():
    """alpha = (-2, 2, 1) at A = 1, Z = 0 gives probability one half."""
    rng = np.random.default_rng(0)
    flags = gen_observation(rng, 20000, 1.0, 0.0, (-2.0, 2.0, 1.0))
    assert abs(flags.mean() - 0.5) < 0.02
    assert not gen_observation(rng, 100, 0.0, 0.0, (-60.0, 0.0, 0.0)).any()


def test_frailty_links_random_effects():
    """With theta = (1, 1), cov(eta, b0) is theta_0 var(eta) = 1."""
    config = SimConfig.default("2-1", n_subjects=2000, seed=5, theta=(1.0, 1.0))
    latent = simulate(config).latent
    cov = np.cov(latent["eta"], latent["b0"])[0, 1]
    assert abs(cov - 1.0) < 0.3


def test_mixed_mechanism_case():
    """Case 1-6 assigns each subject one of the five mechanisms."""
    latent = simulate(SimConfig.default("1-6", n_subjects=200, seed=6)).latent
    assert set(latent["mechanism"]) == {"regular", "covariate", "latent", "previous",
                                        "threshold"}


def test_setting_c_uses_observation_model():
    dataset = generate(SimConfig.default("3-2", n_subjects=100, seed=8))
    assert 0 < dataset.event_recorded.mean() < 1


def test_config_errors():
    with pytest.raises(ConfigError, match="case_id"):
        SimConfig.default("4-1")
    with pytest.raises(ConfigError, match="setting"):
        SimConfig(case_id="1-1", setting="B")
    with pytest.raises(ConfigError, match="beta"):
        SimConfig.default("1-1", beta=(1.0, 2.0))
    assert SimConfig.default("2-1").alpha == (0.0, 0.0, 0.0)
    assert SimConfig.default("3-1").alpha == (-2.0, 2.0, 1.0)
