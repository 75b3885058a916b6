"""
Logistic model for whether the biomarker is recorded at a visit.

logit P(R_i(t) = 1 | dN_i(t) = 1, V_i) = alpha' V_i

V_i is time-invariant, so the visit-level score collapses to the
per-subject counts (o_i recorded out of n_i visits).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import expit

from src.constants import INTERCEPT, NEWTON_MAX_ITER, NEWTON_TOL, SEPARATION_NORM
from src.data_model import PanelDataset, SubjectBaseline
from src.exceptions import DegenerateError, InsufficientDataError, SeparationError
from src.utils.newton import damped_newton

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObsModelFit:
    alpha: np.ndarray
    v_names: Tuple[str, ...]
    intercept: bool
    converged: bool
    iterations: int

    @property
    def names(self) -> Tuple[str, ...]:
        return ((INTERCEPT,) if self.intercept else ()) + self.v_names


def observation_design(dataset: PanelDataset, v_names: Sequence[str],
                       intercept: bool = True) -> np.ndarray:
    v = dataset.covariate_matrix(v_names)
    if intercept:
        v = np.column_stack([np.ones(dataset.n_subjects), v])
    return v


def estimate_alpha(dataset: PanelDataset,
                   v_names: Sequence[str],
                   tol: float = NEWTON_TOL,
                   max_iter: int = NEWTON_MAX_ITER,
                   intercept: bool = True) -> ObsModelFit:
    """
    Solve sum_i V_i {o_i - n_i expit(alpha' V_i)} = 0 by Newton's method.

    Parameters
    ----------
    dataset : PanelDataset
    v_names : sequence of str
        Baseline covariates; an intercept is prepended unless disabled.
    tol, max_iter : optional
        Newton controls

    Returns
    -------
    ObsModelFit

    Raises
    ------
    InsufficientDataError
        If there are no visits.
    DegenerateError
        If all visits or no visits were recorded.
    SeparationError
        If ||alpha||_inf exceeds the separation bound while iterating.
    NotConvergedError
    """
    v_names = tuple(v_names)
    n = dataset.visit_counts().astype(float)
    o = dataset.recorded_counts().astype(float)
    total, recorded = n.sum(), o.sum()
    if total == 0:
        raise InsufficientDataError("the observation model needs at least one visit")
    if recorded == 0 or recorded == total:
        raise DegenerateError(f"recording indicator is constant "
                              f"({int(recorded)} of {int(total)} visits recorded)")

    v = observation_design(dataset, v_names, intercept)
    keep = n > 0
    v, n, o = v[keep], n[keep], o[keep]

    def score(alpha: np.ndarray):
        prob = expit(v @ alpha)
        u = v.T @ (o - n * prob)
        info = (v * (n * prob * (1.0 - prob))[:, None]).T @ v
        return u, info

    def guard(alpha: np.ndarray) -> None:
        if np.max(np.abs(alpha)) > SEPARATION_NORM:
            raise SeparationError(f"observation-model coefficients diverge "
                                  f"(|alpha| > {SEPARATION_NORM:g}); the recording "
                                  f"indicator is separated by {list(v_names)}")

    # the information vanishes along a separating direction, so only the
    # coefficient bound decides
    result = damped_newton(score, np.zeros(v.shape[1]), n_terms=int(total), tol=tol,
                           max_iter=max_iter, limit=np.inf, guard=guard,
                           label="observation model")
    logger.debug("observation model: alpha=%s after %d iterations",
                 np.array2string(result.x, precision=4), result.iterations)
    return ObsModelFit(alpha=result.x, v_names=v_names, intercept=intercept,
                       converged=result.converged, iterations=result.iterations)


def omega(fit: ObsModelFit, baseline: SubjectBaseline) -> float:
    """Recording probability of one subject, constant in time."""
    row = [baseline.covariates[name] for name in fit.v_names]
    if fit.intercept:
        row = [1.0] + row
    return float(expit(np.dot(fit.alpha, row)))


def omega_vector(fit: ObsModelFit, dataset: PanelDataset) -> np.ndarray:
    """Recording probability of every subject of ``dataset``."""
    return expit(observation_design(dataset, fit.v_names, fit.intercept) @ fit.alpha)
