"""
Proportional-rate visiting model with a gamma frailty.

E[dN_i(t) | W_i, eta_i] = xi_i(t) eta_i exp(gamma' W_i) d Lambda_0(t)

gamma is estimated from the frailty-free estimating equation (the frailty
has mean one and drops out of the rate ratio), Lambda_0 by an Aalen-Breslow
step function, and the frailty variance by the method of moments on the
per-subject visit counts.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.constants import INTERCEPT, NEWTON_MAX_ITER, NEWTON_TOL, SINGULAR_CONDITION
from src.data_model import PanelDataset
from src.exceptions import (InsufficientDataError, NonIdentifiableError,
                            ZeroExposureError)
from src.utils.linalg import condition_number
from src.utils.newton import NewtonResult, damped_newton
from src.utils.risk_sets import RiskSetSums

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepFunction:
    """
    Right-continuous step function, zero before the first jump.

    Parameters
    ----------
    jump_times : np.ndarray
        Strictly increasing
    cumulative_values : np.ndarray
        Nondecreasing, value on [jump_times[k], jump_times[k+1])
    """

    jump_times: np.ndarray
    cumulative_values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.jump_times, dtype=float)
        values = np.asarray(self.cumulative_values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("jump_times and cumulative_values must be 1-d of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ValueError("cumulative_values must be nondecreasing")
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "cumulative_values", values)

    def evaluate(self, t) -> np.ndarray:
        """Last cumulative value with jump time <= t (0 before the first jump)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right") - 1
        padded = np.concatenate(([0.0], self.cumulative_values))
        return padded[idx + 1]


@dataclass(frozen=True)
class VisitModelFit:
    gamma: np.ndarray
    w_names: Tuple[str, ...]
    baseline: StepFunction
    sigma_eta2: float
    sigma_eta2_unclamped: float
    iterations: int
    converged: bool


class _VisitEvents:
    """Per-event arrays and risk-set lookups for one dataset and design."""

    def __init__(self, dataset: PanelDataset, w_names: Sequence[str]):
        self.w = dataset.covariate_matrix(w_names)
        known = dataset.event_subject_index >= 0
        self.owner = dataset.event_subject_index[known]
        self.times = dataset.event_times[known]
        self.risk = RiskSetSums(dataset.censoring_times)
        self.positions = self.risk.positions(self.times)

    @property
    def n_events(self) -> int:
        return len(self.times)

    def score(self, gamma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        U(gamma) = sum over events of W_i - Wbar(t) and its information
        matrix, the summed risk-set covariance of W.
        """
        lin = self.w @ gamma
        r = np.exp(lin - lin.max())
        s0 = self.risk.totals(r)[self.positions]
        s1 = self.risk.totals(r[:, None] * self.w)[self.positions]
        s2 = self.risk.totals(r[:, None, None] * self.w[:, :, None] * self.w[:, None, :])
        s2 = s2[self.positions]
        wbar = s1 / s0[:, None]
        u = self.w[self.owner].sum(axis=0) - wbar.sum(axis=0)
        info = (s2 / s0[:, None, None]).sum(axis=0) - wbar.T @ wbar
        return u, info


def _solve_gamma(dataset: PanelDataset,
                 w_names: Sequence[str],
                 tol: float,
                 max_iter: int) -> NewtonResult:
    events = _VisitEvents(dataset, w_names)
    if events.n_events == 0:
        raise InsufficientDataError("the visiting model needs at least one visit")
    p = events.w.shape[1]
    if p == 0:
        return NewtonResult(x=np.zeros(0), iterations=0, converged=True)

    _, info = events.score(np.zeros(p))
    if condition_number(info) > SINGULAR_CONDITION:
        raise NonIdentifiableError(
            f"visiting-model covariates {list(w_names)} do not vary within the "
            f"risk sets of the observed visits")
    return damped_newton(events.score, np.zeros(p), n_terms=events.n_events,
                         tol=tol, max_iter=max_iter, label="visit model")


def estimate_gamma(dataset: PanelDataset,
                   w_names: Sequence[str],
                   tol: float = NEWTON_TOL,
                   max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """
    Solve the visiting-model estimating equation for gamma.

    Parameters
    ----------
    dataset : PanelDataset
    w_names : sequence of str
        Baseline covariates of the visiting model
    tol : float, optional
        ||U||_inf must fall below tol times the number of visits
    max_iter : int, optional

    Returns
    -------
    np.ndarray
        gamma-hat over ``w_names``

    Raises
    ------
    InsufficientDataError
        If the dataset has no visits.
    NonIdentifiableError
        If W - Wbar(t) vanishes over every visit.
    NotConvergedError
    """
    return _solve_gamma(dataset, w_names, tol, max_iter).x


def breslow_baseline(dataset: PanelDataset,
                     w_names: Sequence[str],
                     gamma: np.ndarray) -> StepFunction:
    """
    Aalen-Breslow estimate of the cumulative baseline rate.

    At each distinct visit time s the jump is the number of visits at s
    divided by the sum of exp(gamma' W_j) over subjects with C_j >= s.
    """
    events = _VisitEvents(dataset, w_names)
    if events.n_events == 0:
        return StepFunction(np.zeros(0), np.zeros(0))
    gamma = np.asarray(gamma, dtype=float).reshape(events.w.shape[1])
    if not np.all(np.isfinite(gamma)):
        raise ValueError("gamma must be finite")

    unique_times, counts = np.unique(events.times, return_counts=True)
    at_risk = events.risk.at(np.exp(events.w @ gamma), unique_times)
    assert np.all(at_risk > 0), "empty risk set at a visit time"
    return StepFunction(unique_times, np.cumsum(counts / at_risk))


def _exposure(dataset: PanelDataset, w_names: Sequence[str],
              gamma: np.ndarray, baseline: StepFunction) -> np.ndarray:
    """exp(gamma' W_i) Lambda_0(C_i): expected visit count without frailty."""
    w = dataset.covariate_matrix(w_names)
    return np.exp(w @ np.asarray(gamma, dtype=float)) * baseline.evaluate(dataset.censoring_times)


def _sigma_eta_expression(counts: np.ndarray, exposure: np.ndarray) -> float:
    denominator = float(np.sum(exposure ** 2))
    if denominator == 0:
        raise ZeroExposureError("no subject has positive expected visit count")
    return float(np.sum(counts ** 2 - counts - exposure ** 2)) / denominator


def estimate_sigma_eta(dataset: PanelDataset,
                       w_names: Sequence[str],
                       gamma: np.ndarray,
                       baseline: StepFunction) -> float:
    """
    Moment estimate of the frailty variance, clamped at zero.

    sum_i {n_i^2 - n_i - e_i^2} / sum_i e_i^2 with e_i = exp(gamma' W_i) Lambda_0(C_i).

    Raises
    ------
    ZeroExposureError
        If every e_i is zero.
    """
    counts = dataset.visit_counts().astype(float)
    value = _sigma_eta_expression(counts, _exposure(dataset, w_names, gamma, baseline))
    return max(value, 0.0)


def frailty_posterior_mean(dataset: PanelDataset, fit: VisitModelFit) -> np.ndarray:
    """E(eta_i | n_i, C_i) = (1 + n_i s2) / (1 + e_i s2) under the fitted gamma frailty."""
    counts = dataset.visit_counts().astype(float)
    exposure = _exposure(dataset, fit.w_names, fit.gamma, fit.baseline)
    s2 = fit.sigma_eta2
    return (1.0 + counts * s2) / (1.0 + exposure * s2)


def frailty_covariate(dataset: PanelDataset, fit: VisitModelFit) -> np.ndarray:
    """
    Per-subject multiplier m_i = (n_i - e_i) s2 / (1 + e_i s2).

    The frailty-derived covariate of subject i is m_i times its random-effect
    design row; see :func:`frailty_design`.
    """
    counts = dataset.visit_counts().astype(float)
    exposure = _exposure(dataset, fit.w_names, fit.gamma, fit.baseline)
    s2 = fit.sigma_eta2
    return (counts - exposure) * s2 / (1.0 + exposure * s2)


def frailty_design(dataset: PanelDataset, fit: VisitModelFit,
                   z_names: Sequence[str]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    B_i = m_i [1, Z_i]: columns for the random intercept and each z_name.

    Returns
    -------
    design : np.ndarray
        Shape (n, 1 + len(z_names))
    names : tuple of str
    """
    m = frailty_covariate(dataset, fit)
    z = dataset.covariate_matrix(z_names)
    design = np.column_stack([m, m[:, None] * z]) if z.shape[1] else m[:, None]
    return design, (INTERCEPT,) + tuple(z_names)


def fit_visit_model(dataset: PanelDataset,
                    w_names: Sequence[str],
                    tol: float = NEWTON_TOL,
                    max_iter: int = NEWTON_MAX_ITER) -> VisitModelFit:
    """
    Fit gamma, Lambda_0 and the frailty variance in that order.

    Returns
    -------
    VisitModelFit
    """
    w_names = tuple(w_names)
    result = _solve_gamma(dataset, w_names, tol, max_iter)
    baseline = breslow_baseline(dataset, w_names, result.x)
    counts = dataset.visit_counts().astype(float)
    raw = _sigma_eta_expression(counts, _exposure(dataset, w_names, result.x, baseline))
    if raw < 0:
        logger.info("frailty variance estimate %.4g clamped to 0", raw)
    logger.debug("visit model: gamma=%s, sigma_eta2=%.4g, %d Newton iterations",
                 np.array2string(result.x, precision=4), max(raw, 0.0), result.iterations)
    return VisitModelFit(gamma=result.x, w_names=w_names, baseline=baseline,
                         sigma_eta2=max(raw, 0.0), sigma_eta2_unclamped=raw,
                         iterations=result.iterations, converged=result.converged)
