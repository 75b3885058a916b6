"""
Registry of every estimator under a common interface.
"""

from abc import ABC, abstractmethod
from typing import Callable, Dict, List

from src.constants import CONFOUNDER, EXPOSURE
from src.data_model import DesignSpec, PanelDataset
from src.exceptions import ConfigError
from src.joint_estimators import (JointFitResult, check_identifiable, fit_adapted_liang,
                                  fit_ehrjoint, fit_iirr, fit_jmvl_liang, fit_jmvl_ly)
from src.lme import SUMMARY_STATISTICS, fit_lme, fit_summary_ols


def simulation_design() -> DesignSpec:
    """Design matching the generative model: A and Z everywhere, random slope on A."""
    covariates = (EXPOSURE, CONFOUNDER)
    return DesignSpec(w_names=covariates, v_names=covariates, x_names=covariates,
                      z_names=(EXPOSURE,))


class Estimator(ABC):
    """Base class for all estimators."""

    name: str = ""

    @abstractmethod
    def fit(self, dataset: PanelDataset, design: DesignSpec):
        """Full fit object of the underlying method."""

    @abstractmethod
    def estimate(self, dataset: PanelDataset, design: DesignSpec) -> Dict[str, float]:
        """Coefficient name -> estimate."""


class JointEstimator(Estimator):
    def __init__(self, name: str, fit_function: Callable[..., JointFitResult]):
        self.name = name
        self.fit_function = fit_function

    def fit(self, dataset: PanelDataset, design: DesignSpec) -> JointFitResult:
        check_identifiable(design, self.name)
        return self.fit_function(dataset, design)

    def estimate(self, dataset: PanelDataset, design: DesignSpec) -> Dict[str, float]:
        return self.fit(dataset, design).coefficients()


class LmeEstimator(Estimator):
    def __init__(self, name: str, variant: str):
        self.name = name
        self.variant = variant

    def fit(self, dataset: PanelDataset, design: DesignSpec):
        return fit_lme(dataset, design, self.variant)

    def estimate(self, dataset: PanelDataset, design: DesignSpec) -> Dict[str, float]:
        return self.fit(dataset, design).coefficients()


class SummaryEstimator(Estimator):
    def __init__(self, statistic: str):
        self.name = f"summary:{statistic}"
        self.statistic = statistic

    def fit(self, dataset: PanelDataset, design: DesignSpec) -> Dict[str, float]:
        return fit_summary_ols(dataset, self.statistic, design.x_names)

    def estimate(self, dataset: PanelDataset, design: DesignSpec) -> Dict[str, float]:
        return self.fit(dataset, design)


_ESTIMATORS: Dict[str, Callable[[], Estimator]] = {
    "ehrjoint": lambda: JointEstimator("ehrjoint", fit_ehrjoint),
    "liang": lambda: JointEstimator("liang", fit_jmvl_liang),
    "adapted-liang": lambda: JointEstimator("adapted-liang", fit_adapted_liang),
    "jmvl-ly": lambda: JointEstimator("jmvl-ly", fit_jmvl_ly),
    "iirr": lambda: JointEstimator("iirr", lambda d, s: fit_iirr(d, s, stabilized=False)),
    "iirr-stab": lambda: JointEstimator("iirr-stab", lambda d, s: fit_iirr(d, s, stabilized=True)),
    "lme": lambda: LmeEstimator("lme", "standard"),
    "oa-lme": lambda: LmeEstimator("oa-lme", "oa"),
    "va-lme": lambda: LmeEstimator("va-lme", "va"),
}
for _statistic in SUMMARY_STATISTICS:
    _ESTIMATORS[f"summary:{_statistic}"] = (lambda s: lambda: SummaryEstimator(s))(_statistic)

METHODS: List[str] = list(_ESTIMATORS)


def create_estimator(method: str) -> Estimator:
    """
    Factory function for estimators.

    Parameters
    ----------
    method : str
        One of ``METHODS``

    Returns
    -------
    Estimator

    Raises
    ------
    ConfigError
        If the method is not recognized
    """
    key = method.lower()
    if key not in _ESTIMATORS:
        raise ConfigError(f"Unknown method: {method}. Available methods: {METHODS}")
    return _ESTIMATORS[key]()
