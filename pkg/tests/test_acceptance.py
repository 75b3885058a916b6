"""
Desk-scale Monte Carlo checks: 500 subjects, 200 replications.

Deselected by default; run with ``pytest -m slow``.
"""

import pytest

from src.inference import run_coverage_study, run_replications
from src.simgen import SimConfig

pytestmark = pytest.mark.slow

N_SUBJECTS = 500
N_REPS = 200
JOINT_METHODS = ["ehrjoint", "liang", "adapted-liang", "jmvl-ly", "iirr", "iirr-stab"]
LME_METHODS = ["lme", "oa-lme", "va-lme"]


def _bias(case_id, methods, seed=2024):
    report = run_replications(SimConfig.default(case_id, n_subjects=N_SUBJECTS), methods,
                              N_REPS, seed=seed, n_jobs=-1)
    return {m: report.row(m) for m in methods}


def test_regular_visits_unbiased():
    rows = _bias("1-1", JOINT_METHODS + LME_METHODS + ["summary:mean"])
    for method, row in rows.items():
        if method in ("oa-lme", "va-lme"):
            assert row.failures == N_REPS
            continue
        assert abs(row.bias) < 0.04, method


def test_latent_visits_ordering():
    rows = _bias("1-3", ["liang", "lme", "jmvl-ly"])
    liang, lme, ly = (abs(rows[m].bias) for m in ("liang", "lme", "jmvl-ly"))
    assert liang < lme < ly
    assert -0.32 < rows["liang"].bias < -0.06


def test_informative_frailty_setting_b():
    rows = _bias("2-3", ["ehrjoint", "lme", "adapted-liang"])
    assert abs(rows["ehrjoint"].bias) < 0.06
    assert 0.06 < rows["lme"].bias < 0.22
    assert rows["adapted-liang"].bias < -0.6


def test_ehrjoint_best_in_setting_c():
    rows = _bias("3-3", JOINT_METHODS + LME_METHODS)
    ehrjoint = abs(rows["ehrjoint"].bias)
    for method, row in rows.items():
        if method != "ehrjoint" and row.n_success:
            assert ehrjoint < abs(row.bias), method


def test_bootstrap_coverage():
    study = run_coverage_study(SimConfig.default("2-2", n_subjects=N_SUBJECTS), "ehrjoint",
                               N_REPS, n_boot=200, seed=7, n_jobs=-1)
    assert study.coverage["A"] >= 0.88
