"""Tests for the panel data model and its validation."""

import numpy as np
import pytest

from src.data_model import DesignSpec, SubjectBaseline, VisitEvent, PanelDataset, validate
from src.exceptions import ConfigError, DataValidationError


def test_well_formed_panel_passes(small_panel):
    """A consistent three-subject panel has no violations."""
    report = validate(small_panel)
    assert report.passed
    assert str(report) == "pass"


def test_recorded_visit_without_outcome(panel_builder):
    """A recorded visit must carry an outcome."""
    panel = panel_builder([("1", 5.0, (0.0, 0.0))], [("1", 1.0, True, None)])
    assert validate(panel).codes() == ["outcome-missing-at-recorded-visit"]


def test_violations_are_all_collected(panel_builder):
    """Every broken invariant is reported, not only the first."""
    panel = panel_builder(
        [("1", 5.0, (0.0, 0.0)), ("1", 6.0, (1.0, 0.0))],
        [("1", 7.0, True, 1.0), ("2", 1.0, True, 1.0), ("1", 0.0, False, 2.0)],
    )
    codes = set(validate(panel).codes())
    assert {"duplicate-subject-id", "event-after-censoring", "unknown-subject",
            "event-before-origin", "outcome-present-at-unrecorded-visit"} <= codes


def test_duplicate_event_time(panel_builder):
    panel = panel_builder([("1", 5.0, (0.0, 0.0))],
                          [("1", 2.0, True, 1.0), ("1", 2.0, False, None)])
    assert "duplicate-event-time" in validate(panel).codes()


def test_raise_if_failed_carries_report(panel_builder):
    panel = panel_builder([("1", 5.0, (0.0, np.nan))], [])
    with pytest.raises(DataValidationError) as excinfo:
        validate(panel).raise_if_failed()
    assert excinfo.value.report.codes() == ["nonfinite-covariate"]


def test_events_sorted_by_subject_then_time(panel_builder):
    """Events follow baseline order of subjects, then time."""
    panel = panel_builder(
        [("b", 10.0, (0.0, 0.0)), ("a", 10.0, (1.0, 0.0))],
        [("a", 1.0, True, 1.0), ("b", 3.0, True, 2.0), ("b", 2.0, True, 3.0)],
    )
    assert list(panel.event_subject_ids) == ["b", "b", "a"]
    np.testing.assert_array_equal(panel.event_times, [2.0, 3.0, 1.0])
    np.testing.assert_array_equal(panel.visit_counts(), [2, 1])


def test_from_records_matches_columns(small_panel):
    """Record views rebuild the same panel."""
    rebuilt = PanelDataset.from_records(small_panel.baselines, small_panel.events)
    assert rebuilt == small_panel
    assert small_panel.events[1] == VisitEvent("s1", 5.0, False, None)
    assert small_panel.baselines[0] == SubjectBaseline("s1", {"A": 0.0, "Z": 0.3}, 10.0)


def test_counts_and_measurements(small_panel):
    np.testing.assert_array_equal(small_panel.visit_counts(), [2, 1, 2])
    np.testing.assert_array_equal(small_panel.recorded_counts(), [1, 1, 2])
    measured = small_panel.measurements_only()
    assert measured.n_events == 4
    assert measured.event_recorded.all()
    assert small_panel.tau == 12.0


def test_resample_renumbers_subjects(small_panel):
    """Drawn subjects keep their histories under fresh ids."""
    sample = small_panel.resample([2, 2, 0])
    assert list(sample.subject_ids) == ["1", "2", "3"]
    np.testing.assert_array_equal(sample.visit_counts(), [2, 2, 2])
    np.testing.assert_array_equal(sample.censoring_times, [12.0, 12.0, 10.0])
    assert validate(sample).passed


def test_panel_is_read_only(small_panel):
    with pytest.raises(ValueError):
        small_panel.event_times[0] = 99.0


def test_covariate_matrix_unknown_name(small_panel):
    with pytest.raises(ConfigError):
        small_panel.covariate_matrix(["B"])


def test_design_spec_rules(small_panel):
    """z must be a subset of x; reserved and unknown names are rejected."""
    with pytest.raises(ConfigError):
        DesignSpec(x_names=("A",), z_names=("Z",))
    with pytest.raises(ConfigError):
        DesignSpec(x_names=("time",))
    with pytest.raises(ConfigError):
        DesignSpec(w_names=("A", "A"))
    with pytest.raises(ConfigError):
        DesignSpec(w_names=("B",)).check_against(small_panel)
    DesignSpec(w_names=("A",), x_names=("A", "Z"), z_names=("A",)).check_against(small_panel)
