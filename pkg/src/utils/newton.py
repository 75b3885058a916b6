"""
Damped Newton iteration for estimating equations U(x) = 0.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from src.constants import (NEWTON_MAX_HALVINGS, NEWTON_MAX_ITER, NEWTON_STEP_TOL,
                           NEWTON_TOL, SINGULAR_CONDITION)
from src.exceptions import NotConvergedError
from src.utils.linalg import solve_linear_system

logger = logging.getLogger(__name__)

ScoreFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    iterations: int
    converged: bool


def _norm(vector: np.ndarray) -> float:
    return float(np.max(np.abs(vector))) if vector.size else 0.0


def damped_newton(score: ScoreFunction,
                  x0: np.ndarray,
                  n_terms: int,
                  tol: float = NEWTON_TOL,
                  max_iter: int = NEWTON_MAX_ITER,
                  max_halvings: int = NEWTON_MAX_HALVINGS,
                  limit: float = SINGULAR_CONDITION,
                  guard: Optional[Callable[[np.ndarray], None]] = None,
                  label: str = "newton") -> NewtonResult:
    """
    Solve U(x) = 0 where ``score(x)`` returns U and the information -dU/dx.

    Each Newton step is halved until ||U||_inf does not increase. The
    iteration stops once ||U||_inf <= tol * n_terms and the step just taken
    is below ``NEWTON_STEP_TOL``; the second test keeps iterating along
    directions where U flattens out without a root.

    Parameters
    ----------
    score : callable
        x -> (U, information)
    x0 : np.ndarray
        Starting point
    n_terms : int
        Number of summands in U, scales the tolerance
    guard : callable, optional
        Called with each accepted iterate; may raise to abort.

    Returns
    -------
    NewtonResult

    Raises
    ------
    NotConvergedError
        After ``max_iter`` iterations or ``max_halvings`` failed halvings.
    SingularSystemError
        If the information matrix cannot be inverted.
    """
    x = np.array(x0, dtype=float)
    target = tol * max(n_terms, 1)
    u, info = score(x)

    for iteration in range(1, max_iter + 1):
        step, _ = solve_linear_system(info, u, limit=limit)
        candidate = x + step
        u_new, info_new = score(candidate)
        halvings = 0
        while not (np.all(np.isfinite(u_new)) and _norm(u_new) <= _norm(u)):
            if halvings == max_halvings:
                if _norm(u) <= target:
                    # already at the rounding floor
                    return NewtonResult(x=x, iterations=iteration, converged=True)
                raise NotConvergedError(
                    f"{label}: step halving failed at iteration {iteration} "
                    f"(|U| = {_norm(u):.3g})")
            step = step / 2.0
            halvings += 1
            candidate = x + step
            u_new, info_new = score(candidate)

        x, u, info = candidate, u_new, info_new
        if guard is not None:
            guard(x)
        logger.debug("%s iteration %d: |U| = %.3g, |step| = %.3g, halvings = %d",
                     label, iteration, _norm(u), _norm(step), halvings)

        if _norm(u) <= target and _norm(step) <= NEWTON_STEP_TOL * (1.0 + _norm(x)):
            return NewtonResult(x=x, iterations=iteration, converged=True)

    raise NotConvergedError(f"{label}: no convergence after {max_iter} iterations "
                            f"(|U| = {_norm(u):.3g})")
