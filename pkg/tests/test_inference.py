"""Tests for the bootstrap and the replication harness."""

import numpy as np
import pandas as pd
import pytest

from src.data_model import DesignSpec
from src.exceptions import AllResamplesFailedError, ConfigError, InsufficientDataError, \
    TooFewBootError
from src.inference import bootstrap, run_coverage_study, run_replications, truth_of
from src.simgen import SimConfig, generate, with_seed

CONFIG = SimConfig.default("2-1", n_subjects=40, seed=21)


def _one_measurement_panel(panel_builder, n=200, seed=0):
    """y = 1 + 2 A + N(0, 1), one measurement per subject."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    y = 1.0 + 2.0 * a + rng.normal(size=n)
    return panel_builder([(str(k + 1), 10.0, (a[k],)) for k in range(n)],
                         [(str(k + 1), 1.0, True, y[k]) for k in range(n)],
                         covariate_names=("A",))


def _mean_outcome(dataset, design):
    return {"mean": float(np.mean(dataset.event_outcomes[dataset.event_recorded]))}


def test_too_few_resamples(small_panel):
    with pytest.raises(TooFewBootError):
        bootstrap(small_panel, _mean_outcome, DesignSpec(), n_boot=49)


def test_cloned_subjects_have_zero_se(panel_builder):
    """Every resample of identical subjects is the same dataset."""
    panel = panel_builder([(str(k), 10.0, (1.0,)) for k in range(1, 9)],
                          [(str(k), t, True, y) for k in range(1, 9)
                           for t, y in ((1.0, 2.5), (3.0, -0.5))],
                          covariate_names=("A",))
    result = bootstrap(panel, _mean_outcome, DesignSpec(), n_boot=50)
    assert result.point[0] == pytest.approx(1.0)
    np.testing.assert_allclose(result.se, 0.0, atol=1e-12)
    assert result.n_failed == 0


def test_bootstrap_se_close_to_ols(panel_builder):
    """Pairs bootstrap of a homoskedastic regression tracks the textbook SE."""
    panel = _one_measurement_panel(panel_builder)
    result = bootstrap(panel, "summary:mean", DesignSpec(x_names=("A",)), n_boot=400, seed=3)
    x = np.column_stack([np.ones(panel.n_subjects), panel.covariates[:, 0]])
    y = panel.event_outcomes
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    s2 = np.sum((y - x @ beta) ** 2) / (len(y) - 2)
    textbook = np.sqrt(s2 * np.linalg.inv(x.T @ x)[1, 1])
    assert result.names == ("(Intercept)", "A")
    assert abs(result.se[1] / textbook - 1.0) < 0.2
    assert result.ci_lower[1] < result.point[1] < result.ci_upper[1]
    frame = result.to_frame()
    assert list(frame.columns) == ["coefficient", "estimate", "se", "ci_lower", "ci_upper"]


def test_bootstrap_independent_of_workers(panel_builder):
    panel = _one_measurement_panel(panel_builder, n=60)
    design = DesignSpec(x_names=("A",))
    serial = bootstrap(panel, "summary:mean", design, n_boot=50, seed=9)
    parallel = bootstrap(panel, "summary:mean", design, n_boot=50, seed=9, n_jobs=2)
    np.testing.assert_array_equal(serial.se, parallel.se)
    np.testing.assert_array_equal(serial.ci_lower, parallel.ci_lower)


def test_failed_resamples_are_counted(small_panel):
    def never(dataset, design):
        raise InsufficientDataError("no fit")

    calls = []

    def first_call_only(dataset, design):
        calls.append(1)
        if len(calls) > 1:
            raise InsufficientDataError("no fit")
        return {"x": 1.0}

    with pytest.raises(InsufficientDataError):
        bootstrap(small_panel, never, DesignSpec(), n_boot=50)
    with pytest.raises(AllResamplesFailedError):
        bootstrap(small_panel, first_call_only, DesignSpec(), n_boot=50)


def test_truth_stub_has_zero_error():
    def oracle(dataset, design):
        return truth_of(CONFIG)

    report = run_replications(CONFIG, {"oracle": oracle}, n_reps=3)
    assert {r.coefficient for r in report.rows} == {"(Intercept)", "A", "Z", "time"}
    for row in report.rows:
        assert (row.bias, row.sd, row.rmse) == (0.0, 0.0, 0.0)
        assert row.failures == 0


def test_failures_are_counted_per_method():
    """A method failing on odd event counts leaves the other untouched."""
    n_reps = 6
    config = with_seed(CONFIG, 5)
    odd = sum(generate(config, r).n_events % 2 for r in range(n_reps))

    def picky(dataset, design):
        if dataset.n_events % 2:
            raise InsufficientDataError("odd")
        return {"A": -0.5}

    def never(dataset, design):
        raise InsufficientDataError("never")

    report = run_replications(config, {"picky": picky, "never": never,
                                       "oracle": lambda d, s: {"A": -0.5}}, n_reps=n_reps)
    assert report.row("picky").failures == odd
    assert report.row("picky").n_success == n_reps - odd
    assert report.row("oracle").failures == 0
    dead = report.row("never")
    assert dead.failures == n_reps
    assert np.isnan(dead.rmse)
    assert report.failure_messages["never"] == ["InsufficientDataError: never"]


def test_rmse_identity():
    report = run_replications(CONFIG, ["summary:mean"], n_reps=5)
    row = report.row("summary:mean")
    r = row.n_success
    assert row.rmse ** 2 == pytest.approx(row.bias ** 2 + row.sd ** 2 * (r - 1) / r)


def test_replications_deterministic_and_subset_invariant():
    both = run_replications(CONFIG, ["summary:mean", "summary:max"], n_reps=4, seed=2)
    again = run_replications(CONFIG, ["summary:mean", "summary:max"], n_reps=4, seed=2)
    alone = run_replications(CONFIG, ["summary:mean"], n_reps=4, seed=2)
    pd.testing.assert_frame_equal(both.to_frame(), again.to_frame())
    assert both.row("summary:mean") == alone.row("summary:mean")
    assert both.seed == 2


def test_replications_independent_of_workers():
    serial = run_replications(CONFIG, ["summary:mean", "iirr"], n_reps=4)
    parallel = run_replications(CONFIG, ["summary:mean", "iirr"], n_reps=4, n_jobs=2)
    pd.testing.assert_frame_equal(serial.to_frame(), parallel.to_frame())


def test_single_replication_rejected():
    with pytest.raises(ConfigError):
        run_replications(CONFIG, ["summary:mean"], n_reps=1)


def test_report_layout():
    report = run_replications(CONFIG, ["summary:mean"], n_reps=2)
    frame = report.to_frame()
    assert list(frame.columns) == ["method", "coefficient", "bias_x100", "sd_x100",
                                   "rmse_x100", "failures"]
    row = report.row("summary:mean")
    a = frame[frame.coefficient == "A"].iloc[0]
    assert a.bias_x100 == pytest.approx(100 * row.bias)
    assert report.to_dict()["config"]["case_id"] == "2-1"


def test_coverage_study_counts():
    study = run_coverage_study(CONFIG, "summary:mean", n_reps=3, n_boot=50,
                               design=DesignSpec(x_names=("A", "Z")))
    assert study.n_success + study.failures == 3
    assert set(study.coverage) == {"(Intercept)", "A", "Z"}
    assert all(0.0 <= c <= 1.0 for c in study.coverage.values())
