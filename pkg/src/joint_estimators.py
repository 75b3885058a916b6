"""
Estimating-equation fitters for the longitudinal coefficients.

All fitters share one structure: the outcome residual is linear in the
unknowns, so each estimating equation reduces to a square linear system
A x = c assembled over the recorded measurements.

EHRJoint, JMVL-Liang and Adapted-Liang differ only in which visits form the
counting process and in the recording probability omega_j entering the
risk-set weights omega_j n_j / Lambda_0(C_j). JMVL-LY centers with
exp(gamma' W)-weighted risk-set means and a nearest-measurement average of
the outcome. IIRR weighting solves a weighted least-squares problem.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.constants import INTERCEPT, NEWTON_TOL, TIME
from src.data_model import DesignSpec, PanelDataset
from src.exceptions import ConfigError, InsufficientDataError, TimeNotIdentifiableError
from src.obs_process import ObsModelFit, estimate_alpha, omega_vector
from src.utils.linalg import solve_linear_system
from src.utils.risk_sets import RiskSetSums
from src.visit_process import (VisitModelFit, estimate_gamma, fit_visit_model,
                               frailty_design)

logger = logging.getLogger(__name__)

CENTERED_METHODS = ("ehrjoint", "liang", "adapted-liang", "jmvl-ly")
ADAPTED_OMEGA = 0.5


@dataclass(frozen=True)
class JointFitResult:
    """
    Output of an estimating-equation fitter.

    ``theta`` is None when the frailty variance estimate is zero, in which
    case the frailty block is dropped from the system.
    """

    method: str
    beta: np.ndarray
    beta_names: Tuple[str, ...]
    theta: Optional[np.ndarray]
    theta_names: Tuple[str, ...]
    condition_number: float
    visit_fit: VisitModelFit
    obs_fit: Optional[ObsModelFit]
    counting_process: str
    n_terms: int

    def coefficients(self) -> Dict[str, float]:
        return dict(zip(self.beta_names, map(float, self.beta)))

    def theta_coefficients(self) -> Dict[str, float]:
        if self.theta is None:
            return {}
        return dict(zip(self.theta_names, map(float, self.theta)))


def check_identifiable(design: DesignSpec, method: str) -> None:
    """
    Reject a time fixed effect for the centered estimating equations.

    Risk-set centering subtracts from t its own weighted average, which is t
    itself, so the time row of the system is identically zero.

    Raises
    ------
    TimeNotIdentifiableError
    """
    if design.include_time_fixed_effect and method in CENTERED_METHODS:
        raise TimeNotIdentifiableError(
            f"{method}: time cannot be a fixed effect. Centering over the risk set "
            f"removes any covariate shared by all subjects at a given time, so the "
            f"estimating equation for the time coefficient is zero for every value "
            f"of beta. Drop include_time_fixed_effect or use iirr / an LME variant.")


@dataclass(frozen=True)
class _Measurements:
    """Recorded visits of a dataset as parallel arrays."""

    owner: np.ndarray
    times: np.ndarray
    outcomes: np.ndarray

    @classmethod
    def of(cls, dataset: PanelDataset) -> "_Measurements":
        mask = dataset.event_recorded & (dataset.event_subject_index >= 0)
        return cls(owner=dataset.event_subject_index[mask],
                   times=dataset.event_times[mask],
                   outcomes=dataset.event_outcomes[mask])

    def __len__(self) -> int:
        return len(self.times)


def _require_measurements(dataset: PanelDataset, method: str) -> _Measurements:
    measurements = _Measurements.of(dataset)
    if len(measurements) == 0:
        raise InsufficientDataError(f"{method}: no recorded measurements")
    return measurements


def risk_set_means(risk: RiskSetSums, weights: np.ndarray,
                   features: np.ndarray, times: np.ndarray) -> np.ndarray:
    """
    Weighted averages of per-subject ``features`` over the risk set at each time.

    Returns an array of shape (len(times), k).
    """
    positions = risk.positions(times)
    denominator = risk.totals(weights)[positions]
    numerator = risk.totals(weights[:, None] * features)[positions]
    return numerator / denominator[:, None]


def assemble_centered_system(dataset: PanelDataset,
                             weights: np.ndarray,
                             features: np.ndarray,
                             include_time: bool = False
                             ) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Build A and c of the centered estimating equation.

    For every recorded measurement of subject i at time t,
    D = F_i - Fbar(t) with Fbar the ``weights``-weighted risk-set mean, and
    A += D F_i', c += D Y. With ``include_time`` a time column is appended to
    F; its risk-set mean is t, so the matching row of A is zero.

    Parameters
    ----------
    dataset : PanelDataset
    weights : np.ndarray
        Per-subject centering weights, shape (n,)
    features : np.ndarray
        Per-subject covariates [X_i, B_i], shape (n, k)
    include_time : bool, optional

    Returns
    -------
    A : np.ndarray, shape (k, k) or (k + 1, k + 1)
    c : np.ndarray
    n_terms : int
        Number of recorded measurements summed over
    """
    measurements = _require_measurements(dataset, "centered equation")
    risk = RiskSetSums(dataset.censoring_times)
    f = features[measurements.owner]
    d = f - risk_set_means(risk, weights, features, measurements.times)
    if include_time:
        f = np.column_stack([f, measurements.times])
        d = np.column_stack([d, measurements.times - measurements.times])
    a = d.T @ f
    c = d.T @ measurements.outcomes
    return a, c, len(measurements)


def _centering_weights(counting: PanelDataset, fit: VisitModelFit,
                       omega: np.ndarray) -> np.ndarray:
    """omega_j n_j / Lambda_0(C_j), zero for subjects without visits."""
    counts = counting.visit_counts().astype(float)
    cumulative = fit.baseline.evaluate(counting.censoring_times)
    weights = np.zeros(counting.n_subjects)
    visited = counts > 0
    weights[visited] = omega[visited] * counts[visited] / cumulative[visited]
    return weights


def _fit_frailty_system(method: str,
                        dataset: PanelDataset,
                        counting: PanelDataset,
                        design: DesignSpec,
                        omega: np.ndarray,
                        obs_fit: Optional[ObsModelFit],
                        counting_process: str,
                        tol: float) -> JointFitResult:
    """Shared body of EHRJoint, JMVL-Liang and Adapted-Liang."""
    check_identifiable(design, method)
    design.check_against(dataset)
    if not design.x_names:
        raise ConfigError(f"{method}: x_names is empty; centered equations have no intercept")
    _require_measurements(dataset, method)

    visit_fit = fit_visit_model(counting, design.w_names, tol=tol)
    x = dataset.covariate_matrix(design.x_names)
    theta_names: Tuple[str, ...] = ()
    if visit_fit.sigma_eta2 > 0:
        b, theta_names = frailty_design(counting, visit_fit, design.z_names)
        features = np.column_stack([x, b])
    else:
        logger.info("%s: frailty variance is 0, solving for beta without theta", method)
        features = x

    weights = _centering_weights(counting, visit_fit, omega)
    a, c, n_terms = assemble_centered_system(dataset, weights, features)
    solution, cond = solve_linear_system(a, c)

    p = x.shape[1]
    theta = solution[p:] if theta_names else None
    logger.debug("%s: beta=%s theta=%s cond=%.3g", method,
                 np.array2string(solution[:p], precision=4),
                 None if theta is None else np.array2string(theta, precision=4), cond)
    return JointFitResult(method=method, beta=solution[:p], beta_names=design.x_names,
                          theta=theta, theta_names=theta_names, condition_number=cond,
                          visit_fit=visit_fit, obs_fit=obs_fit,
                          counting_process=counting_process, n_terms=n_terms)


def fit_ehrjoint(dataset: PanelDataset, design: DesignSpec,
                 tol: float = NEWTON_TOL) -> JointFitResult:
    """
    EHRJoint: visiting, observation and longitudinal processes jointly.

    1. gamma, Lambda_0 and the frailty variance from all visits;
    2. the frailty covariate B_i;
    3. alpha and omega_i from the recording indicators;
    4. (beta, theta) from the centered equation with weights
       omega_j n_j / Lambda_0(C_j).

    When every visit was recorded the observation model is degenerate and
    omega_i = 1 is used, which makes the fit identical to JMVL-Liang.

    Raises
    ------
    TimeNotIdentifiableError, SingularSystemError
        And any error of the nuisance fits.
    """
    check_identifiable(design, "ehrjoint")
    design.check_against(dataset)
    if np.all(dataset.event_recorded):
        obs_fit = None
        omega = np.ones(dataset.n_subjects)
    else:
        obs_fit = estimate_alpha(dataset, design.v_names, tol=tol,
                                 intercept=design.v_intercept)
        omega = omega_vector(obs_fit, dataset)
    return _fit_frailty_system("ehrjoint", dataset, dataset, design, omega, obs_fit,
                               "visits", tol)


def fit_jmvl_liang(dataset: PanelDataset, design: DesignSpec,
                   tol: float = NEWTON_TOL) -> JointFitResult:
    """
    JMVL-Liang on the measurement process.

    Visits without a recorded biomarker are dropped first, so n_i, Lambda_0,
    the frailty variance and B_i all come from measurements; omega = 1.
    """
    counting = dataset.measurements_only()
    return _fit_frailty_system("liang", dataset, counting, design,
                               np.ones(dataset.n_subjects), None, "measurements", tol)


def fit_adapted_liang(dataset: PanelDataset, design: DesignSpec,
                      tol: float = NEWTON_TOL) -> JointFitResult:
    """
    JMVL-Liang on all visits with the observation model fixed at alpha = 0.

    omega = 1/2 for every subject; a constant omega cancels from the
    risk-set means.
    """
    return _fit_frailty_system("adapted-liang", dataset, dataset, design,
                               np.full(dataset.n_subjects, ADAPTED_OMEGA), None,
                               "visits", tol)


def nearest_measurement_means(dataset: PanelDataset,
                              risk_weights: np.ndarray,
                              times: np.ndarray) -> np.ndarray:
    """
    Risk-set average of each subject's measurement nearest to t.

    Subjects without measurements are left out of both numerator and
    denominator. An equidistant pair resolves to the earlier measurement.

    Parameters
    ----------
    dataset : PanelDataset
    risk_weights : np.ndarray
        Per-subject weights, shape (n,)
    times : np.ndarray
        Evaluation times

    Returns
    -------
    np.ndarray
        Shape (len(times),)
    """
    measurements = _Measurements.of(dataset)
    unique_times, inverse = np.unique(times, return_inverse=True)
    numerator = np.zeros(len(unique_times))
    denominator = np.zeros(len(unique_times))
    if len(measurements):
        splits = np.flatnonzero(np.diff(measurements.owner)) + 1
        for rows in np.split(np.arange(len(measurements)), splits):
            j = int(measurements.owner[rows[0]])
            at_risk = unique_times <= dataset.censoring_times[j]
            own_times = measurements.times[rows]
            midpoints = 0.5 * (own_times[1:] + own_times[:-1])
            nearest = measurements.outcomes[rows][np.searchsorted(midpoints, unique_times,
                                                                  side="left")]
            numerator += np.where(at_risk, risk_weights[j] * nearest, 0.0)
            denominator += np.where(at_risk, risk_weights[j], 0.0)
    return (numerator / denominator)[inverse]


def fit_jmvl_ly(dataset: PanelDataset, design: DesignSpec,
                tol: float = NEWTON_TOL) -> JointFitResult:
    """
    JMVL-LY marginal model on the measurement process.

    Solves sum K(t) {X_i - Xbar(t)} [Y_i(t) - Ybar*(t) - beta'{X_i - Xbar(t)}] = 0
    over recorded measurements, with K(t) the number at risk and both
    averages weighted by exp(gamma' W_j) over the risk set.

    Raises
    ------
    ConfigError
        If w_names is not a subset of x_names.
    """
    method = "jmvl-ly"
    check_identifiable(design, method)
    design.check_against(dataset)
    if not design.x_names:
        raise ConfigError(f"{method}: x_names is empty")
    extra = [w for w in design.w_names if w not in design.x_names]
    if extra:
        raise ConfigError(f"{method}: w_names must be a subset of x_names; not in x_names: {extra}")
    measurements = _require_measurements(dataset, method)

    counting = dataset.measurements_only()
    visit_fit = fit_visit_model(counting, design.w_names, tol=tol)
    risk = RiskSetSums(dataset.censoring_times)
    w = dataset.covariate_matrix(design.w_names)
    rate = np.exp(w @ visit_fit.gamma)
    x = dataset.covariate_matrix(design.x_names)

    k = risk.size(measurements.times)
    d = x[measurements.owner] - risk_set_means(risk, rate, x, measurements.times)
    ystar = nearest_measurement_means(dataset, rate, measurements.times)
    a = (d * k[:, None]).T @ d
    c = (d * k[:, None]).T @ (measurements.outcomes - ystar)
    beta, cond = solve_linear_system(a, c)
    return JointFitResult(method=method, beta=beta, beta_names=design.x_names, theta=None,
                          theta_names=(), condition_number=cond, visit_fit=visit_fit,
                          obs_fit=None, counting_process="measurements",
                          n_terms=len(measurements))


def iirr_design(dataset: PanelDataset, x_names: Sequence[str],
                include_time: bool) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """Per-measurement rows [1, X_i, (t)] and their names."""
    measurements = _Measurements.of(dataset)
    x = dataset.covariate_matrix(x_names)[measurements.owner]
    columns = [np.ones(len(measurements)), x]
    names = (INTERCEPT,) + tuple(x_names)
    if include_time:
        columns.append(measurements.times)
        names += (TIME,)
    return np.column_stack(columns), names


def fit_iirr(dataset: PanelDataset, design: DesignSpec, stabilized: bool = False,
             tol: float = NEWTON_TOL) -> JointFitResult:
    """
    Inverse-intensity-rate-ratio weighted least squares.

    Solves sum K(t) / rho_i X_i(t) {Y_i(t) - beta' X_i(t)} = 0 with
    rho_i = exp(gamma' W_i) / h_i. h = 1 unless ``stabilized``, in which case
    h_i = exp(gamma_x' X_i) with gamma_x from the visiting equation using the
    baseline x_names in place of W. Time enters X unless the design turns
    it off explicitly.
    """
    method = "iirr-stab" if stabilized else "iirr"
    check_identifiable(design, method)
    design.check_against(dataset)
    measurements = _require_measurements(dataset, method)

    counting = dataset.measurements_only()
    visit_fit = fit_visit_model(counting, design.w_names, tol=tol)
    log_rho = dataset.covariate_matrix(design.w_names) @ visit_fit.gamma
    if stabilized and design.x_names:
        gamma_x = estimate_gamma(counting, design.x_names, tol=tol)
        log_rho = log_rho - dataset.covariate_matrix(design.x_names) @ gamma_x

    include_time = design.include_time_fixed_effect is not False
    x, names = iirr_design(dataset, design.x_names, include_time)
    risk = RiskSetSums(dataset.censoring_times)
    weights = risk.size(measurements.times) / np.exp(log_rho[measurements.owner])
    a = (x * weights[:, None]).T @ x
    c = (x * weights[:, None]).T @ measurements.outcomes
    beta, cond = solve_linear_system(a, c)
    return JointFitResult(method=method, beta=beta, beta_names=names, theta=None,
                          theta_names=(), condition_number=cond, visit_fit=visit_fit,
                          obs_fit=None, counting_process="measurements",
                          n_terms=len(measurements))
