"""
Guarded dense linear solves.
"""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from src.constants import SINGULAR_CONDITION
from src.exceptions import SingularSystemError

logger = logging.getLogger(__name__)


def condition_number(matrix: np.ndarray) -> float:
    """2-norm condition number; inf for singular or non-finite input."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 1.0
    if not np.all(np.isfinite(matrix)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        try:
            cond = np.linalg.cond(matrix)
        except np.linalg.LinAlgError:
            return float("inf")
    return float(cond) if np.isfinite(cond) else float("inf")


def solve_linear_system(matrix: np.ndarray,
                        rhs: np.ndarray,
                        limit: float = SINGULAR_CONDITION) -> Tuple[np.ndarray, float]:
    """
    Solve ``matrix @ x = rhs`` with a column-pivoted QR factorization.

    Parameters
    ----------
    matrix : np.ndarray
        Square system matrix, shape (k, k)
    rhs : np.ndarray
        Right-hand side, shape (k,)
    limit : float, optional
        Largest admissible condition number

    Returns
    -------
    solution : np.ndarray
        Shape (k,)
    cond : float
        Condition number of ``matrix``

    Raises
    ------
    SingularSystemError
        If the condition number is infinite or exceeds ``limit``.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if matrix.size == 0:
        return np.zeros(0), 1.0

    cond = condition_number(matrix)
    if not np.isfinite(cond) or cond > limit:
        raise SingularSystemError(
            f"linear system is singular or ill-conditioned "
            f"(condition number {cond:.3g}, limit {limit:.0e})")

    q, r, perm = scipy.linalg.qr(matrix, pivoting=True)
    try:
        z = scipy.linalg.solve_triangular(r, q.T @ rhs)
    except np.linalg.LinAlgError as err:
        raise SingularSystemError(str(err)) from err
    solution = np.empty_like(z)
    solution[perm] = z
    logger.debug("solved %dx%d system, condition number %.3g", *matrix.shape, cond)
    return solution, cond
