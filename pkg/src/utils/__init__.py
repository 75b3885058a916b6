"""Numerical helpers shared by the estimators."""

from src.utils.analysis import bias_sd_rmse, percentile_interval
from src.utils.linalg import condition_number, solve_linear_system
from src.utils.risk_sets import RiskSetSums

__all__ = [
    'bias_sd_rmse',
    'percentile_interval',
    'condition_number',
    'solve_linear_system',
    'RiskSetSums'
]
