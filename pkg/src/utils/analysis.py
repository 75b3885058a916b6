"""
Summary statistics for Monte Carlo and bootstrap output.
"""

from typing import Tuple

import numpy as np


def bias_sd_rmse(estimates: np.ndarray, true_value: float) -> Tuple[float, float, float]:
    """
    Bias, sample standard deviation and root mean squared error.

    Parameters
    ----------
    estimates : np.ndarray
        Estimates from the successful replications, shape (R,)
    true_value : float
        Generative value of the coefficient

    Returns
    -------
    tuple of float
        (bias, sd, rmse). SD uses divisor R - 1 and is 0 for a single
        replication; all three are NaN when ``estimates`` is empty.
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        return float("nan"), float("nan"), float("nan")
    bias = float(np.mean(est) - true_value)
    sd = float(np.std(est, ddof=1)) if est.size > 1 else 0.0
    rmse = float(np.sqrt(np.mean((est - true_value) ** 2)))
    return bias, sd, rmse


def percentile_interval(draws: np.ndarray, level: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Percentile confidence bounds, column-wise.

    Parameters
    ----------
    draws : np.ndarray
        Bootstrap replicates, shape (B, k)
    level : float
        Coverage level, e.g. 0.95

    Returns
    -------
    lower, upper : np.ndarray
        Shape (k,) each
    """
    alpha = 0.5 * (1.0 - level)
    lower = np.quantile(draws, alpha, axis=0)
    upper = np.quantile(draws, 1.0 - alpha, axis=0)
    return lower, upper
