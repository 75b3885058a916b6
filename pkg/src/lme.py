"""
Likelihood-based comparators: linear mixed-effects models and
summary-statistic regressions.

The mixed model is y_i ~ N(X_i beta, sigma^2 (I + Z_i Psi Z_i')) with
Psi = Sigma_b / sigma^2 = L L'. For a given L, beta and sigma^2 have closed
forms, so only the log-Cholesky entries of L are searched numerically. The
per-subject inverse and determinant go through the q x q matrix
M_i = I + L' Z_i' Z_i L, built from sufficient statistics computed once.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from src.constants import (COLLINEAR_CONDITION, COUNT, INTERCEPT, LME_FATOL, LME_MAX_FEV,
                           LME_RESTARTS, LME_XATOL, TIME)
from src.data_model import DesignSpec, PanelDataset
from src.exceptions import (CollinearError, ConfigError, InsufficientDataError,
                            NotConvergedError, SingularSystemError)
from src.utils.linalg import condition_number, solve_linear_system

logger = logging.getLogger(__name__)

VARIANTS = ("standard", "oa", "va")
SUMMARY_STATISTICS = ("min", "mean", "median", "max")


@dataclass(frozen=True)
class LmeFit:
    """
    Maximum-likelihood mixed-model fit.

    ``sigma_b`` is the random-effect covariance; ``sigma_b_chol`` its
    Cholesky factor.
    """

    variant: str
    beta: np.ndarray
    beta_names: Tuple[str, ...]
    sigma_b_chol: np.ndarray
    sigma_eps2: float
    loglik: float
    converged: bool
    n_evaluations: int

    @property
    def sigma_b(self) -> np.ndarray:
        return self.sigma_b_chol @ self.sigma_b_chol.T

    def coefficients(self) -> Dict[str, float]:
        return dict(zip(self.beta_names, map(float, self.beta)))


def prior_counts(dataset: PanelDataset, variant: str) -> np.ndarray:
    """
    Strictly-prior counts at each recorded measurement.

    ``oa`` counts earlier measurements of the subject, ``va`` earlier visits
    whether recorded or not. Both are 0 at a subject's first event.
    """
    index = dataset.event_subject_index
    n = len(index)
    starts = np.r_[0, np.flatnonzero(np.diff(index)) + 1] if n else np.zeros(0, dtype=int)
    first = np.zeros(n, dtype=int)
    if n:
        first[starts] = starts
        first = np.maximum.accumulate(first)
    if variant == "va":
        counts = np.arange(n) - first
    elif variant == "oa":
        recorded = dataset.event_recorded.astype(int)
        before = np.cumsum(recorded) - recorded
        counts = before - before[first]
    else:
        raise ConfigError(f"prior counts are defined for 'oa' and 'va', not '{variant}'")
    mask = dataset.event_recorded & (index >= 0)
    return counts[mask].astype(float)


def lme_design(dataset: PanelDataset, design: DesignSpec, variant: str
               ) -> Tuple[np.ndarray, Tuple[str, ...], np.ndarray, np.ndarray, np.ndarray]:
    """
    Fixed-effect rows, their names, random-effect rows, outcomes and owners
    for every recorded measurement.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown LME variant '{variant}'; expected one of {VARIANTS}")
    if len(design.z_names) > 1:
        raise ConfigError("the mixed model supports at most one random slope (z_names)")
    mask = dataset.event_recorded & (dataset.event_subject_index >= 0)
    owner = dataset.event_subject_index[mask]
    times = dataset.event_times[mask]
    y = dataset.event_outcomes[mask]

    columns = [np.ones(len(y)), dataset.covariate_matrix(design.x_names)[owner]]
    names = (INTERCEPT,) + tuple(design.x_names)
    if design.include_time_fixed_effect is not False:
        columns.append(times)
        names += (TIME,)
    if variant != "standard":
        columns.append(prior_counts(dataset, variant))
        names += (COUNT,)
    x = np.column_stack(columns)
    z = np.column_stack([np.ones(len(y)), dataset.covariate_matrix(design.z_names)[owner]])
    return x, names, z, y, owner


def _chol_from_params(params: np.ndarray, q: int) -> np.ndarray:
    """Lower-triangular factor with log-diagonal parametrization."""
    chol = np.zeros((q, q))
    rows, cols = np.tril_indices(q)
    chol[rows, cols] = params
    chol[np.diag_indices(q)] = np.exp(np.diag(chol))
    return chol


class LmeObjective:
    """
    Profiled ML log-likelihood of the mixed model.

    Parameters
    ----------
    x : np.ndarray
        Fixed-effect rows, shape (N, p)
    z : np.ndarray
        Random-effect rows, shape (N, q)
    y : np.ndarray
        Outcomes, shape (N,)
    owner : np.ndarray
        Subject index of each row
    """

    def __init__(self, x: np.ndarray, z: np.ndarray, y: np.ndarray, owner: np.ndarray):
        _, owner = np.unique(owner, return_inverse=True)
        n_groups = int(owner.max()) + 1 if len(owner) else 0
        self.n_obs, self.p = x.shape
        self.q = z.shape[1]
        self.xtx = x.T @ x
        self.xty = x.T @ y
        self.yty = float(y @ y)
        self.ztz = np.zeros((n_groups, self.q, self.q))
        self.ztx = np.zeros((n_groups, self.q, self.p))
        self.zty = np.zeros((n_groups, self.q))
        np.add.at(self.ztz, owner, z[:, :, None] * z[:, None, :])
        np.add.at(self.ztx, owner, z[:, :, None] * x[:, None, :])
        np.add.at(self.zty, owner, z * y[:, None])

    @property
    def n_params(self) -> int:
        return self.q * (self.q + 1) // 2

    def gls(self, chol: np.ndarray) -> Tuple[np.ndarray, float, float]:
        """
        Generalized least squares given the scaled factor L.

        Returns
        -------
        beta : np.ndarray
        sigma2 : float
            ML residual variance
        logdet : float
            sum_i log det M_i
        """
        m = np.eye(self.q) + np.einsum("ab,gbc,cd->gad", chol.T, self.ztz, chol)
        lzx = np.einsum("ab,gbp->gap", chol.T, self.ztx)
        lzy = np.einsum("ab,gb->ga", chol.T, self.zty)
        m_inv_zx = np.linalg.solve(m, lzx)
        m_inv_zy = np.linalg.solve(m, lzy[:, :, None])[:, :, 0]
        s_xx = self.xtx - np.einsum("gap,gar->pr", lzx, m_inv_zx)
        s_xy = self.xty - np.einsum("gap,ga->p", lzx, m_inv_zy)
        s_yy = self.yty - float(np.einsum("ga,ga->", lzy, m_inv_zy))
        beta, _ = solve_linear_system(s_xx, s_xy, limit=np.inf)
        rss = max(s_yy - float(beta @ s_xy), 0.0)
        _, logdets = np.linalg.slogdet(m)
        return beta, rss / self.n_obs, float(np.sum(logdets))

    def loglik(self, params: np.ndarray) -> float:
        """Profiled log-likelihood at log-Cholesky ``params``."""
        _, sigma2, logdet = self.gls(_chol_from_params(np.asarray(params, dtype=float), self.q))
        if not sigma2 > 0:
            return -np.inf
        return -0.5 * self.n_obs * (np.log(2 * np.pi * sigma2) + 1.0) - 0.5 * logdet

    def negative(self, params: np.ndarray) -> float:
        try:
            value = self.loglik(params)
        except SingularSystemError:
            return np.inf
        return -value if np.isfinite(value) else np.inf


def fit_lme(dataset: PanelDataset, design: DesignSpec, variant: str = "standard",
            restarts: int = LME_RESTARTS, seed: int = 0) -> LmeFit:
    """
    Fit a mixed model by maximum likelihood.

    Parameters
    ----------
    dataset : PanelDataset
    design : DesignSpec
        x_names are the fixed covariates, z_names the random slope (at most one)
    variant : {'standard', 'oa', 'va'}
        'oa' adds the number of prior measurements, 'va' the number of prior
        visits as a fixed effect
    restarts : int, optional
        Extra Nelder-Mead runs started from perturbations of the best point
    seed : int, optional
        Seed of the restart perturbations

    Raises
    ------
    InsufficientDataError
        Fewer than two measurements.
    CollinearError
        The fixed-effect design is rank deficient.
    NotConvergedError
        No optimizer run met its tolerance.
    """
    design.check_against(dataset)
    x, names, z, y, owner = lme_design(dataset, design, variant)
    if len(y) < 2:
        raise InsufficientDataError(f"mixed model needs at least two measurements, got {len(y)}")
    cond = condition_number(x) if len(y) >= x.shape[1] else np.inf
    if cond > COLLINEAR_CONDITION:
        raise CollinearError(f"{variant} mixed model: fixed-effect design {list(names)} is "
                             f"rank deficient (condition number {cond:.3g})")

    objective = LmeObjective(x, z, y, owner)
    options = dict(xatol=LME_XATOL, fatol=LME_FATOL, maxfev=LME_MAX_FEV)
    best = minimize(objective.negative, np.zeros(objective.n_params),
                    method="Nelder-Mead", options=options)
    converged = bool(best.success)
    evaluations = int(best.nfev)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        start = best.x + rng.normal(0.0, 0.5, size=objective.n_params)
        trial = minimize(objective.negative, start, method="Nelder-Mead", options=options)
        evaluations += int(trial.nfev)
        if trial.fun < best.fun:
            best = trial
        converged = converged or bool(trial.success)
    if not converged or not np.isfinite(best.fun):
        raise NotConvergedError(f"{variant} mixed model: Nelder-Mead did not converge "
                                f"after {evaluations} evaluations")

    chol = _chol_from_params(best.x, objective.q)
    beta, sigma2, _ = objective.gls(chol)
    logger.debug("%s LME: loglik=%.6f, sigma2=%.4g, %d evaluations",
                 variant, -best.fun, sigma2, evaluations)
    return LmeFit(variant=variant, beta=beta, beta_names=names,
                  sigma_b_chol=np.sqrt(sigma2) * chol, sigma_eps2=sigma2,
                  loglik=float(-best.fun), converged=converged, n_evaluations=evaluations)


def fit_summary_ols(dataset: PanelDataset, statistic: str,
                    x_names: Sequence[str]) -> Dict[str, float]:
    """
    Regress a per-subject summary of the measurements on baseline covariates.

    Subjects without measurements are left out. The median of an even
    number of values is the midpoint of the two central ones.

    Parameters
    ----------
    dataset : PanelDataset
    statistic : {'min', 'mean', 'median', 'max'}
    x_names : sequence of str

    Returns
    -------
    dict
        Coefficients over (Intercept, *x_names)

    Raises
    ------
    InsufficientDataError
        Fewer measured subjects than coefficients.
    """
    if statistic not in SUMMARY_STATISTICS:
        raise ConfigError(f"unknown summary statistic '{statistic}'; "
                          f"expected one of {SUMMARY_STATISTICS}")
    mask = dataset.event_recorded & (dataset.event_subject_index >= 0)
    frame = pd.DataFrame({"subject": dataset.event_subject_index[mask],
                          "y": dataset.event_outcomes[mask]})
    summary = frame.groupby("subject", sort=True)["y"].agg(statistic)
    subjects = summary.index.to_numpy()

    names = (INTERCEPT,) + tuple(x_names)
    if len(subjects) < len(names):
        raise InsufficientDataError(f"summary regression needs at least {len(names)} measured "
                                    f"subjects, got {len(subjects)}")
    x = np.column_stack([np.ones(len(subjects)),
                         dataset.covariate_matrix(x_names)[subjects]])
    cond = condition_number(x)
    if cond > COLLINEAR_CONDITION:
        raise CollinearError(f"summary regression design is rank deficient "
                             f"(condition number {cond:.3g})")
    beta, *_ = np.linalg.lstsq(x, summary.to_numpy(), rcond=None)
    return dict(zip(names, map(float, beta)))
