"""
Risk-set sums for right-censored follow-up with time-invariant covariates.

Subject i is at risk at time t while t <= C_i. Because covariates do not
change over time, a weighted sum over the risk set at t only changes at
censoring times. Subjects are therefore sorted once by censoring time and
the sums are kept as reverse cumulative totals, so that every query is a
binary search.
"""

import numpy as np


class RiskSetSums:
    """
    Suffix sums over subjects ordered by censoring time.

    Parameters
    ----------
    censoring_times : np.ndarray
        C_i for each subject, shape (n,)
    """

    def __init__(self, censoring_times: np.ndarray):
        censoring_times = np.asarray(censoring_times, dtype=float)
        self.order = np.argsort(censoring_times, kind="stable")
        self.sorted_times = censoring_times[self.order]
        self.n_subjects = len(censoring_times)

    def positions(self, times: np.ndarray) -> np.ndarray:
        """Index of the first sorted subject still at risk at each time."""
        return np.searchsorted(self.sorted_times, np.asarray(times, dtype=float), side="left")

    def totals(self, values: np.ndarray) -> np.ndarray:
        """
        Reverse cumulative sums of per-subject values.

        Parameters
        ----------
        values : np.ndarray
            Shape (n,) or (n, ...); row i belongs to subject i.

        Returns
        -------
        np.ndarray
            Shape (n + 1, ...); row k is the sum over the sorted subjects
            k, k+1, ..., n-1 and the last row is zero.
        """
        values = np.asarray(values, dtype=float)[self.order]
        suffix = np.zeros((self.n_subjects + 1,) + values.shape[1:])
        if self.n_subjects:
            suffix[:-1] = np.cumsum(values[::-1], axis=0)[::-1]
        return suffix

    def at(self, values: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Sum of ``values`` over the risk set at each of ``times``."""
        return self.totals(values)[self.positions(times)]

    def size(self, times: np.ndarray) -> np.ndarray:
        """Number of subjects at risk at each time (K(t))."""
        return (self.n_subjects - self.positions(times)).astype(float)
