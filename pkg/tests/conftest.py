"""Shared fixtures: small hand-built panels with known estimates."""

import numpy as np
import pytest

from src.data_model import DesignSpec, PanelDataset


def build_panel(baselines, events, covariate_names=("A", "Z"), study_origin=0.0):
    """
    baselines : list of (subject_id, censoring_time, covariate values)
    events : list of (subject_id, time, recorded, outcome or None)
    """
    return PanelDataset(
        subject_ids=[b[0] for b in baselines],
        censoring_times=[b[1] for b in baselines],
        covariate_names=covariate_names,
        covariates=np.array([b[2] for b in baselines], dtype=float).reshape(
            len(baselines), len(covariate_names)),
        event_subject_ids=[e[0] for e in events],
        event_times=[e[1] for e in events],
        event_recorded=[e[2] for e in events],
        event_outcomes=[np.nan if e[3] is None else e[3] for e in events],
        study_origin=study_origin,
    )


@pytest.fixture
def panel_builder():
    return build_panel


@pytest.fixture
def small_panel():
    """Three well-formed subjects, one unrecorded visit."""
    return build_panel(
        [("s1", 10.0, (0.0, 0.3)), ("s2", 8.0, (1.0, -0.5)), ("s3", 12.0, (1.0, 1.2))],
        [("s1", 2.0, True, 1.5), ("s1", 5.0, False, None), ("s2", 1.0, True, 0.2),
         ("s3", 3.0, True, -0.7), ("s3", 9.5, True, 0.4)],
    )


NOISE_FREE_BETA = (0.5, -1.0)
NOISE_FREE_COVARIATES = [(0.0, 0.3), (1.0, -0.5), (0.0, 1.2), (1.0, 0.8), (0.0, -1.0),
                         (1.0, 0.1)]


@pytest.fixture
def noise_free_panel():
    """
    Y = 0.5 A - 1.0 Z + 7 at every visit; common censoring and identical
    visit schedules, so the frailty variance estimate is zero.
    """
    baselines, events = [], []
    for k, (a, z) in enumerate(NOISE_FREE_COVARIATES):
        sid = str(k + 1)
        baselines.append((sid, 10.0, (a, z)))
        y = NOISE_FREE_BETA[0] * a + NOISE_FREE_BETA[1] * z + 7.0
        for t in (2.0, 4.0, 6.0):
            events.append((sid, t, True, y))
    return build_panel(baselines, events)


@pytest.fixture
def panel_design():
    return DesignSpec(w_names=("A", "Z"), v_names=(), x_names=("A", "Z"), z_names=("A",))


def micro_panel(seed: int):
    """Five subjects with 2-6 visits at continuous times and mixed recording."""
    rng = np.random.default_rng(seed)
    a_values = (0.0, 1.0, 0.0, 1.0, 1.0)
    baselines, events = [], []
    for k in range(5):
        sid = str(k + 1)
        cens = float(rng.uniform(5.0, 10.0))
        baselines.append((sid, cens, (a_values[k], float(rng.normal()))))
        times = np.sort(rng.uniform(0.1, cens, size=int(rng.integers(2, 7))))
        for j, t in enumerate(times):
            if k == 0:
                recorded = j == 0
            elif k == 1:
                recorded = True
            else:
                recorded = bool(rng.random() < 0.7)
            y = float(rng.normal(1.0, 2.0)) if recorded else None
            events.append((sid, float(t), recorded, y))
    return build_panel(baselines, events)


MICRO_SEEDS = (11, 12, 13, 14, 15)
