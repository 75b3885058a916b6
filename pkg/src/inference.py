"""
Subject-level bootstrap and the Monte Carlo replication harness.

Resamples and replications are independent tasks. Each draws from a stream
keyed by (seed, index), and joblib returns results in task order, so the
numbers do not depend on the number of workers.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.constants import (CI_LEVEL, CONFOUNDER, EXPOSURE, INTERCEPT, MIN_BOOT, N_BOOT,
                           TIME)
from src.data_model import DesignSpec, PanelDataset
from src.estimators import Estimator, create_estimator, simulation_design
from src.exceptions import (AllResamplesFailedError, ConfigError,
                            EstimationError, TooFewBootError)
from src.simgen import SimConfig, generate, with_seed
from src.utils.analysis import bias_sd_rmse, percentile_interval

logger = logging.getLogger(__name__)

EstimateFunction = Callable[[PanelDataset, DesignSpec], Dict[str, float]]
MethodSpec = Union[Sequence[str], Mapping[str, EstimateFunction]]

REPORT_COLUMNS = ["method", "coefficient", "bias_x100", "sd_x100", "rmse_x100", "failures"]


def _estimate_function(method: Union[str, Estimator, EstimateFunction]) -> EstimateFunction:
    if isinstance(method, str):
        return create_estimator(method).estimate
    if isinstance(method, Estimator):
        return method.estimate
    return method


def _resolve_methods(methods: MethodSpec) -> Dict[str, EstimateFunction]:
    if isinstance(methods, Mapping):
        return dict(methods)
    return {name: _estimate_function(name) for name in methods}


def _progress(verbose: bool, done: int, total: int, label: str) -> None:
    if verbose and total >= 10 and done % (total // 10) == 0:
        logger.info("%s %d/%d", label, done, total)


def truth_of(config: SimConfig) -> Dict[str, float]:
    """Generative values of the marginal longitudinal coefficients."""
    b0, ba, bz, bt = config.beta
    return {INTERCEPT: b0, EXPOSURE: ba, CONFOUNDER: bz, TIME: bt}


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile bootstrap summary; arrays follow ``names``."""

    names: Tuple[str, ...]
    point: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    n_boot: int
    n_failed: int
    level: float = CI_LEVEL

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"coefficient": self.names, "estimate": self.point,
                             "se": self.se, "ci_lower": self.ci_lower,
                             "ci_upper": self.ci_upper})


def _bootstrap_draw(dataset: PanelDataset, estimate: EstimateFunction, design: DesignSpec,
                    seed: int, index: int) -> Optional[Dict[str, float]]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    sample = dataset.resample(rng.integers(0, dataset.n_subjects, size=dataset.n_subjects))
    try:
        return estimate(sample, design)
    except EstimationError as err:
        logger.debug("resample %d failed: %s", index, err)
        return None


def bootstrap(dataset: PanelDataset,
              method: Union[str, Estimator, EstimateFunction],
              design: DesignSpec,
              n_boot: int = N_BOOT,
              seed: int = 0,
              level: float = CI_LEVEL,
              n_jobs: int = 1,
              verbose: bool = False) -> BootstrapResult:
    """
    Nonparametric bootstrap over subjects.

    Whole subjects are drawn with replacement and the complete fit, nuisance
    models included, is rerun on each resample. Resamples whose fit raises
    an EstimationError are dropped and counted.

    Parameters
    ----------
    dataset : PanelDataset
    method : str, Estimator or callable
    design : DesignSpec
    n_boot : int, optional
        Number of resamples, at least 50
    seed : int, optional
        Resample b uses the stream (seed, b)
    level : float, optional
        Percentile interval coverage
    n_jobs : int, optional
        joblib workers

    Returns
    -------
    BootstrapResult

    Raises
    ------
    TooFewBootError
        If ``n_boot`` < 50.
    AllResamplesFailedError
        If no resample produced an estimate.
    """
    if n_boot < MIN_BOOT:
        raise TooFewBootError(f"n_boot must be at least {MIN_BOOT}, got {n_boot}")
    estimate = _estimate_function(method)
    point = estimate(dataset, design)
    names = tuple(point)

    draws = []
    if n_jobs == 1:
        for b in range(n_boot):
            draws.append(_bootstrap_draw(dataset, estimate, design, seed, b))
            _progress(verbose, b + 1, n_boot, "bootstrap resample")
    else:
        draws = Parallel(n_jobs=n_jobs)(
            delayed(_bootstrap_draw)(dataset, estimate, design, seed, b) for b in range(n_boot))

    kept = [d for d in draws if d is not None]
    n_failed = n_boot - len(kept)
    if not kept:
        raise AllResamplesFailedError(f"all {n_boot} bootstrap resamples failed")
    if n_failed:
        logger.info("bootstrap: %d of %d resamples failed and were dropped", n_failed, n_boot)

    matrix = np.array([[d[name] for name in names] for d in kept])
    se = matrix.std(axis=0, ddof=1) if len(kept) > 1 else np.zeros(len(names))
    lower, upper = percentile_interval(matrix, level)
    if verbose:
        logger.info("bootstrap complete: %d resamples, %d failed", n_boot, n_failed)
    return BootstrapResult(names=names, point=np.array([point[n] for n in names]), se=se,
                           ci_lower=lower, ci_upper=upper, n_boot=n_boot,
                           n_failed=n_failed, level=level)


@dataclass(frozen=True)
class ReplicationRow:
    method: str
    coefficient: str
    bias: float
    sd: float
    rmse: float
    n_success: int
    failures: int


@dataclass(frozen=True)
class ReplicationReport:
    """Bias, SD and RMSE per (method, coefficient) over seeded replications."""

    rows: Tuple[ReplicationRow, ...]
    n_reps: int
    seed: int
    config: Dict
    runtime_seconds: Dict[str, float] = field(default_factory=dict)
    failure_messages: Dict[str, List[str]] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """Rows with the values scaled by 100, in report.csv layout."""
        return pd.DataFrame([{
            "method": r.method,
            "coefficient": r.coefficient,
            "bias_x100": 100.0 * r.bias,
            "sd_x100": 100.0 * r.sd,
            "rmse_x100": 100.0 * r.rmse,
            "failures": r.failures,
        } for r in self.rows], columns=REPORT_COLUMNS)

    def row(self, method: str, coefficient: str = EXPOSURE) -> ReplicationRow:
        for r in self.rows:
            if r.method == method and r.coefficient == coefficient:
                return r
        raise KeyError((method, coefficient))

    def to_dict(self) -> Dict:
        return {
            "n_reps": self.n_reps,
            "seed": self.seed,
            "config": self.config,
            "runtime_seconds": self.runtime_seconds,
            "failure_messages": self.failure_messages,
            "rows": [r.__dict__ for r in self.rows],
        }


def _replicate(config: SimConfig, methods: Dict[str, EstimateFunction], design: DesignSpec,
               replicate: int):
    """Generate one dataset and fit every method; returns {method: (estimates, error, secs)}."""
    dataset = generate(config, replicate)
    outcome = {}
    for name, estimate in methods.items():
        start = time.perf_counter()
        try:
            result, error = estimate(dataset, design), None
        except EstimationError as err:
            result, error = None, f"{type(err).__name__}: {err}"
        outcome[name] = (result, error, time.perf_counter() - start)
    return outcome


def run_replications(sim_config: SimConfig,
                     methods: MethodSpec,
                     n_reps: int,
                     seed: Optional[int] = None,
                     design: Optional[DesignSpec] = None,
                     n_jobs: int = 1,
                     verbose: bool = False) -> ReplicationReport:
    """
    Monte Carlo study of several estimators on one simulation case.

    Replication r uses the dataset ``generate(config, r)``, so results of a
    method do not depend on which other methods run. A method raising an
    EstimationError on a replication adds to its failure count only.

    Parameters
    ----------
    sim_config : SimConfig
    methods : sequence of str or mapping of name to callable
        Callables take (dataset, design) and return {coefficient: estimate}.
    n_reps : int
        At least 2
    seed : int, optional
        Overrides ``sim_config.seed``
    design : DesignSpec, optional
        Defaults to the simulation design
    n_jobs : int, optional
        joblib workers over replications

    Returns
    -------
    ReplicationReport
    """
    if n_reps < 2:
        raise ConfigError(f"n_reps must be at least 2, got {n_reps}")
    config = with_seed(sim_config, sim_config.seed if seed is None else seed)
    design = design or simulation_design()
    fitters = _resolve_methods(methods)
    truth = truth_of(config)

    if n_jobs == 1:
        outcomes = []
        for r in range(n_reps):
            outcomes.append(_replicate(config, fitters, design, r))
            _progress(verbose, r + 1, n_reps, f"case {config.case_id} replication")
    else:
        outcomes = Parallel(n_jobs=n_jobs)(
            delayed(_replicate)(config, fitters, design, r) for r in range(n_reps))

    rows: List[ReplicationRow] = []
    runtimes: Dict[str, float] = {}
    messages: Dict[str, List[str]] = {}
    for name in fitters:
        results = [o[name][0] for o in outcomes]
        errors = [o[name][1] for o in outcomes if o[name][1] is not None]
        runtimes[name] = float(np.mean([o[name][2] for o in outcomes]))
        if errors:
            messages[name] = sorted(set(errors))
            logger.info("%s failed on %d of %d replications (%s)", name, len(errors),
                        n_reps, errors[0])
        succeeded = [r for r in results if r is not None]
        coefficients = [c for c in truth if any(c in r for r in succeeded)]
        if not coefficients:
            rows.append(ReplicationRow(name, EXPOSURE, float("nan"), float("nan"),
                                       float("nan"), 0, n_reps))
            continue
        for coefficient in coefficients:
            estimates = [r[coefficient] for r in succeeded if coefficient in r]
            bias, sd, rmse = bias_sd_rmse(np.array(estimates), truth[coefficient])
            rows.append(ReplicationRow(name, coefficient, bias, sd, rmse,
                                       len(estimates), n_reps - len(estimates)))

    if verbose:
        for r in rows:
            if r.coefficient == EXPOSURE:
                logger.info("case %s %-14s bias %+.4f  sd %.4f  rmse %.4f  failures %d",
                            config.case_id, r.method, r.bias, r.sd, r.rmse, r.failures)
    return ReplicationReport(rows=tuple(rows), n_reps=n_reps, seed=config.seed,
                             config=config.to_dict(), runtime_seconds=runtimes,
                             failure_messages=messages)


@dataclass(frozen=True)
class CoverageReport:
    method: str
    coverage: Dict[str, float]
    n_success: int
    failures: int
    n_boot: int
    level: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"coefficient": list(self.coverage),
                             "coverage": list(self.coverage.values())})


def _coverage_draw(config: SimConfig, method: str, design: DesignSpec, n_boot: int,
                   level: float, replicate: int):
    dataset = generate(config, replicate)
    boot_seed = int(np.random.SeedSequence(config.seed, spawn_key=(replicate, 1))
                    .generate_state(1, dtype=np.uint64)[0])
    try:
        return bootstrap(dataset, method, design, n_boot=n_boot, seed=boot_seed, level=level)
    except (EstimationError, AllResamplesFailedError) as err:
        logger.debug("coverage replicate %d failed: %s", replicate, err)
        return None


def run_coverage_study(sim_config: SimConfig,
                       method: str,
                       n_reps: int,
                       n_boot: int = N_BOOT,
                       seed: Optional[int] = None,
                       design: Optional[DesignSpec] = None,
                       level: float = CI_LEVEL,
                       n_jobs: int = 1,
                       verbose: bool = False) -> CoverageReport:
    """
    Empirical coverage of percentile bootstrap intervals.

    Each replication is bootstrapped ``n_boot`` times; the share of
    replications whose interval contains the generative value is reported
    per coefficient.
    """
    if n_boot < MIN_BOOT:
        raise TooFewBootError(f"n_boot must be at least {MIN_BOOT}, got {n_boot}")
    config = with_seed(sim_config, sim_config.seed if seed is None else seed)
    design = design or simulation_design()
    truth = truth_of(config)

    if n_jobs == 1:
        results = []
        for r in range(n_reps):
            results.append(_coverage_draw(config, method, design, n_boot, level, r))
            _progress(verbose, r + 1, n_reps, "coverage replication")
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_coverage_draw)(config, method, design, n_boot, level, r)
            for r in range(n_reps))

    kept = [b for b in results if b is not None]
    coverage = {}
    for name in (kept[0].names if kept else ()):
        if name not in truth:
            continue
        hits = [lo <= truth[name] <= hi
                for b in kept for n, lo, hi in zip(b.names, b.ci_lower, b.ci_upper) if n == name]
        coverage[name] = float(np.mean(hits))
    if verbose:
        logger.info("coverage of %s over %d replications: %s", method, len(kept), coverage)
    return CoverageReport(method=method, coverage=coverage, n_success=len(kept),
                          failures=n_reps - len(kept), n_boot=n_boot, level=level)


__all__ = ["BootstrapResult", "ReplicationReport", "ReplicationRow", "CoverageReport",
           "bootstrap", "run_replications", "run_coverage_study", "truth_of",
           "REPORT_COLUMNS"]
