"""Tests for the estimator factory."""

import pytest

from src.estimators import METHODS, JointEstimator, SummaryEstimator, create_estimator
from src.exceptions import ConfigError


def test_method_registry():
    assert METHODS[:2] == ["ehrjoint", "liang"]
    for name in ("adapted-liang", "jmvl-ly", "iirr", "iirr-stab", "lme", "oa-lme", "va-lme",
                 "summary:min", "summary:mean", "summary:median", "summary:max"):
        assert name in METHODS


def test_factory_is_case_insensitive():
    estimator = create_estimator("EHRJoint")
    assert isinstance(estimator, JointEstimator)
    assert estimator.name == "ehrjoint"
    summary = create_estimator("Summary:Median")
    assert isinstance(summary, SummaryEstimator)
    assert summary.statistic == "median"


def test_unknown_method():
    with pytest.raises(ConfigError, match="Unknown method"):
        create_estimator("gee")


def test_estimate_names_follow_design(noise_free_panel, panel_design):
    estimate = create_estimator("ehrjoint").estimate(noise_free_panel, panel_design)
    assert list(estimate) == ["A", "Z"]
    assert estimate["A"] == pytest.approx(0.5, abs=1e-9)
