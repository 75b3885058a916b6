"""
Seeded generators for the simulation cases.

Setting A (cases 1-1 .. 1-6) varies the visiting mechanism with every
biomarker recorded. Setting B (2-1 .. 2-3) links a gamma frailty to the
random effects and adds a logistic observation process. Setting C
(3-1 .. 3-6) keeps the outcome and observation models of Setting B but
draws visits from the Setting A mechanisms.

Every subject draws from its own counter-based stream keyed by
(seed, replicate, subject index), so results do not depend on the number of
subjects generated after it or on how subjects are split across workers.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import norm

from src.constants import (ALPHA_IO, ALPHA_NON_IO, BETA, CENSORING_TIME, CONFOUNDER,
                           COVARIATE_GAMMA, EXPOSURE, FRAILTY_GAMMA, FRAILTY_VAR,
                           LATENT_GAMMA, LATENT_GAMMA_B, LATENT_SIGMA_ETA2, N_SUBJECTS,
                           PREVIOUS_GAMMA, PREVIOUS_GAMMA_Y, PROB_EXPOSURE, SIGMA_B_DIAG,
                           SIGMA_EPS2, STUDY_ORIGIN, THETA, THRESHOLD_GRID_STEP,
                           THRESHOLD_QUANTILE, VISIT_INTERVAL)
from src.data_model import PanelDataset
from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

CASES = {
    "A": ("1-1", "1-2", "1-3", "1-4", "1-5", "1-6"),
    "B": ("2-1", "2-2", "2-3"),
    "C": ("3-1", "3-2", "3-3", "3-4", "3-5", "3-6"),
}

# Setting A visiting mechanisms, indexed by the case suffix
MECHANISMS = ("regular", "covariate", "latent", "previous", "threshold")


def setting_of(case_id: str) -> str:
    for setting, cases in CASES.items():
        if case_id in cases:
            return setting
    raise ConfigError(f"case_id: unknown case '{case_id}'; "
                      f"expected one of {[c for cs in CASES.values() for c in cs]}")


@dataclass(frozen=True)
class VisitParams:
    """Parameters of every visiting mechanism; each case reads the ones it uses."""

    interval: float = VISIT_INTERVAL
    covariate_gamma: Tuple[float, float, float] = COVARIATE_GAMMA
    latent_gamma: Tuple[float, float, float] = LATENT_GAMMA
    latent_gamma_b: float = LATENT_GAMMA_B
    latent_sigma_eta2: float = LATENT_SIGMA_ETA2
    previous_gamma: Tuple[float, float, float] = PREVIOUS_GAMMA
    previous_gamma_y: float = PREVIOUS_GAMMA_Y
    grid_step: float = THRESHOLD_GRID_STEP
    threshold_quantile: float = THRESHOLD_QUANTILE
    frailty_gamma: Tuple[float, float, float] = FRAILTY_GAMMA

    def __post_init__(self):
        for name in ("covariate_gamma", "latent_gamma", "previous_gamma", "frailty_gamma"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 3:
                raise ConfigError(f"gamma.{name}: expected (gamma_0, gamma_a, gamma_z)")
            object.__setattr__(self, name, value)
        if self.interval <= 0:
            raise ConfigError("gamma.interval must be positive")
        if self.grid_step <= 0:
            raise ConfigError("gamma.grid_step must be positive")
        if self.latent_sigma_eta2 <= 0:
            raise ConfigError("gamma.latent_sigma_eta2 must be positive")
        if not 0.0 < self.threshold_quantile < 1.0:
            raise ConfigError("gamma.threshold_quantile must lie in (0, 1)")


@dataclass(frozen=True)
class SimConfig:
    """
    Generative parameters of one simulation case.

    ``setting`` is derived from ``case_id`` when omitted. ``alpha`` defaults
    to (0, 0, 0) for cases 2-1 and 2-2 and to (-2, 2, 1) for 2-3 and all of
    Setting C; it is unused in Setting A.
    """

    case_id: str
    setting: Optional[str] = None
    n_subjects: int = N_SUBJECTS
    seed: int = 0
    beta: Tuple[float, float, float, float] = BETA
    sigma_eps2: float = SIGMA_EPS2
    sigma_b_diag: Tuple[float, float] = SIGMA_B_DIAG
    theta: Tuple[float, float] = THETA
    frailty_var: float = FRAILTY_VAR
    gamma: VisitParams = field(default_factory=VisitParams)
    alpha: Optional[Tuple[float, float, float]] = None
    t0: float = STUDY_ORIGIN
    censoring_time: float = CENSORING_TIME
    prob_exposure: float = PROB_EXPOSURE

    def __post_init__(self):
        setting = setting_of(self.case_id)
        if self.setting is not None and self.setting != setting:
            raise ConfigError(f"setting: case {self.case_id} belongs to setting "
                              f"{setting}, not {self.setting}")
        object.__setattr__(self, "setting", setting)
        if isinstance(self.gamma, dict):
            object.__setattr__(self, "gamma", VisitParams(**self.gamma))
        if self.alpha is None:
            default = ALPHA_NON_IO if self.case_id in ("2-1", "2-2") else ALPHA_IO
            object.__setattr__(self, "alpha", default)

        for name, size in (("beta", 4), ("sigma_b_diag", 2), ("theta", 2), ("alpha", 3)):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != size:
                raise ConfigError(f"{name}: expected {size} values, got {len(value)}")
            object.__setattr__(self, name, value)

        if int(self.n_subjects) < 1:
            raise ConfigError("n_subjects must be at least 1")
        object.__setattr__(self, "n_subjects", int(self.n_subjects))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        if self.sigma_eps2 < 0 or min(self.sigma_b_diag) < 0 or self.frailty_var < 0:
            raise ConfigError("sigma_eps2, sigma_b_diag and frailty_var must be nonnegative")
        if self.censoring_time <= self.t0:
            raise ConfigError("censoring_time must exceed t0")
        if not 0.0 <= self.prob_exposure <= 1.0:
            raise ConfigError("prob_exposure must lie in [0, 1]")

    @classmethod
    def default(cls, case_id: str, **overrides) -> "SimConfig":
        """Default parameters for ``case_id``, with keyword overrides."""
        return cls(case_id=case_id, **overrides)

    @property
    def mechanism_index(self) -> int:
        """Suffix of the case id minus one (0-based)."""
        return int(self.case_id.split("-")[1]) - 1

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SimulationOutput:
    dataset: PanelDataset
    latent: pd.DataFrame
    threshold: Optional[float]


def subject_rng(seed: int, replicate: int, subject: int) -> np.random.Generator:
    """Counter-based stream for one subject of one replicate."""
    sequence = np.random.SeedSequence(seed, spawn_key=(replicate, subject))
    return np.random.Generator(np.random.Philox(sequence))


RateFunction = Callable[[int, Optional[float]], float]


def gen_visits_renewal(rng: np.random.Generator,
                       rate: Union[float, RateFunction],
                       t0: float,
                       censoring_time: float,
                       outcome_at: Optional[Callable[[float], float]] = None,
                       initial_outcome: Optional[float] = None
                       ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Visit times from exponential gaps, truncated at the censoring time.

    Parameters
    ----------
    rng : np.random.Generator
    rate : float or callable
        Constant rate, or ``rate(j, previous_outcome)`` for the j-th gap
        (1-based). ``previous_outcome`` is ``initial_outcome`` for j = 1.
    t0, censoring_time : float
        Follow-up window (t0, C]
    outcome_at : callable, optional
        Draws the biomarker at a visit time; required when the rate depends
        on the previous outcome.

    Returns
    -------
    times : np.ndarray
    outcomes : np.ndarray or None
        The values drawn by ``outcome_at``, when given.

    Raises
    ------
    ValueError
        If a rate is not positive.
    """
    if not callable(rate):
        rate = float(rate)
        if not rate > 0:
            raise ValueError(f"visit rate must be positive, got {rate}")
        span = censoring_time - t0
        block = max(8, int(2 * rate * span) + 8)
        pieces = []
        t = t0
        while True:
            arrivals = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
            inside = arrivals[arrivals <= censoring_time]
            pieces.append(inside)
            if len(inside) < block:
                break
            t = arrivals[-1]
        times = np.concatenate(pieces)
        outcomes = None
        if outcome_at is not None:
            outcomes = np.array([outcome_at(s) for s in times])
        return times, outcomes

    times: List[float] = []
    values: List[float] = []
    previous = initial_outcome
    t = t0
    j = 1
    while True:
        current = float(rate(j, previous))
        if not current > 0:
            raise ValueError(f"visit rate must be positive, got {current} at gap {j}")
        t += rng.exponential(1.0 / current)
        if t > censoring_time:
            break
        times.append(t)
        if outcome_at is not None:
            previous = outcome_at(t)
            values.append(previous)
        j += 1
    return np.array(times), (np.array(values) if outcome_at is not None else None)


def threshold_grid(t0: float, censoring_time: float, grid_step: float) -> np.ndarray:
    """Grid t0 + g, t0 + 2g, ..., up to C."""
    count = int(np.floor((censoring_time - t0) / grid_step + 1e-9))
    return np.minimum(t0 + grid_step * np.arange(1, count + 1), censoring_time)


def gen_visits_threshold(rng: np.random.Generator,
                         mean_path: Callable[[np.ndarray], np.ndarray],
                         sigma_eps2: float,
                         threshold: float,
                         t0: float,
                         censoring_time: float,
                         grid_step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Visits at the grid times where the biomarker path exceeds ``threshold``.

    The path is ``mean_path(t)`` plus independent noise at each grid point.
    Returns the visit times and the path values there; those values are the
    biomarker readings at the visits.
    """
    grid = threshold_grid(t0, censoring_time, grid_step)
    path = mean_path(grid) + rng.normal(0.0, np.sqrt(sigma_eps2), size=len(grid))
    above = path > threshold
    return grid[above], path[above]


def population_threshold(config: SimConfig) -> float:
    """
    Quantile of the marginal biomarker distribution, averaged over the grid.

    Given A, Y(t) is normal with mean beta_0 + beta_a A + beta_t t and
    variance beta_z^2 + var(b_0 + b_1 A) + sigma_eps^2. The threshold solves
    mean_t mean_A P(Y(t) <= y) = q. In Setting C the frailty link adds
    sigma_eta^2 (theta_0 + theta_1 A)^2 to the random-effect variance.
    """
    b0, ba, bz, bt = config.beta
    var_b0, var_b1 = config.sigma_b_diag
    grid = threshold_grid(config.t0, config.censoring_time, config.gamma.grid_step)
    link = config.frailty_var if config.setting == "C" else 0.0
    th0, th1 = config.theta

    components = []
    for a, weight in ((0.0, 1.0 - config.prob_exposure), (1.0, config.prob_exposure)):
        if weight == 0:
            continue
        var = bz ** 2 + var_b0 + a * var_b1 + config.sigma_eps2 + link * (th0 + th1 * a) ** 2
        components.append((weight, b0 + ba * a + bt * grid, np.sqrt(var)))

    q = config.gamma.threshold_quantile

    def excess(y: float) -> float:
        cdf = sum(w * norm.cdf((y - mu) / s) for w, mu, s in components)
        return float(np.mean(cdf)) - q

    lo = min(mu.min() for _, mu, _ in components) - 12 * max(s for _, _, s in components)
    hi = max(mu.max() for _, mu, _ in components) + 12 * max(s for _, _, s in components)
    return float(brentq(excess, lo, hi, xtol=1e-12))


def gen_outcome(rng: np.random.Generator,
                times: np.ndarray,
                a: float,
                z: float,
                b: np.ndarray,
                beta: Tuple[float, float, float, float],
                sigma_eps2: float) -> np.ndarray:
    """(beta_0 + b_0) + (beta_a + b_1) A + beta_z Z + beta_t t + eps at each time."""
    times = np.asarray(times, dtype=float)
    mean = _mean_path(a, z, b, beta)(times)
    if sigma_eps2 == 0:
        return mean
    return mean + rng.normal(0.0, np.sqrt(sigma_eps2), size=len(times))


def gen_observation(rng: np.random.Generator,
                    n_visits: int,
                    a: float,
                    z: float,
                    alpha: Tuple[float, float, float]) -> np.ndarray:
    """Independent recording flags with logit P(R = 1) = alpha_0 + alpha_a A + alpha_z Z."""
    prob = expit(alpha[0] + alpha[1] * a + alpha[2] * z)
    return rng.random(n_visits) < prob


def _mean_path(a: float, z: float, b: np.ndarray,
               beta: Tuple[float, float, float, float]) -> Callable[[np.ndarray], np.ndarray]:
    b0, ba, bz, bt = beta
    level = (b0 + b[0]) + (ba + b[1]) * a + bz * z
    return lambda t: level + bt * np.asarray(t, dtype=float)


def _draw_frailty(rng: np.random.Generator, variance: float, mean: float = 1.0) -> float:
    """Gamma with the given mean and shape 1/variance; degenerate at ``mean`` if variance is 0."""
    if variance == 0:
        return mean
    return float(rng.gamma(1.0 / variance, variance * mean))


def _simulate_subject(config: SimConfig, rng: np.random.Generator, threshold: Optional[float]):
    p = config.gamma
    a = float(rng.random() < config.prob_exposure)
    z = float(rng.standard_normal())

    sd_b = np.sqrt(np.asarray(config.sigma_b_diag))
    if config.setting == "A":
        eta = np.nan
        b = sd_b * rng.standard_normal(2)
    else:
        eta = _draw_frailty(rng, config.frailty_var)
        b = np.asarray(config.theta) * (eta - 1.0) + sd_b * rng.standard_normal(2)

    if config.setting == "B":
        mechanism = "regular" if config.case_id == "2-1" else "frailty"
    elif config.mechanism_index == 5:
        mechanism = MECHANISMS[int(rng.integers(5))]
    else:
        mechanism = MECHANISMS[config.mechanism_index]

    t0, cens = config.t0, config.censoring_time
    mean_path = _mean_path(a, z, b, config.beta)
    noise_sd = np.sqrt(config.sigma_eps2)
    visit_frailty = np.nan
    outcomes = None

    if mechanism == "regular":
        count = int(np.floor((cens - t0) / p.interval + 1e-9))
        times = t0 + p.interval * np.arange(1, count + 1)
    elif mechanism == "covariate":
        g0, ga, gz = p.covariate_gamma
        times, _ = gen_visits_renewal(rng, np.exp(g0 + ga * a + gz * z), t0, cens)
    elif mechanism == "latent":
        g0, ga, gz = p.latent_gamma
        visit_frailty = _draw_frailty(rng, p.latent_sigma_eta2,
                                      mean=float(np.exp(p.latent_gamma_b * b[1])))
        times, _ = gen_visits_renewal(rng, visit_frailty * np.exp(g0 + ga * a + gz * z), t0, cens)
    elif mechanism == "previous":
        g0, ga, gz = p.previous_gamma
        base = g0 + ga * a + gz * z

        def rate(j: int, previous: float) -> float:
            return float(np.exp(base + p.previous_gamma_y * previous))

        def outcome_at(t: float) -> float:
            return float(mean_path(t) + noise_sd * rng.standard_normal())

        times, outcomes = gen_visits_renewal(rng, rate, t0, cens, outcome_at=outcome_at,
                                             initial_outcome=float(mean_path(t0)))
    elif mechanism == "threshold":
        times, outcomes = gen_visits_threshold(rng, mean_path, config.sigma_eps2, threshold,
                                               t0, cens, p.grid_step)
    else:
        g0, ga, gz = p.frailty_gamma
        visit_frailty = eta
        times, _ = gen_visits_renewal(rng, eta * np.exp(g0 + ga * a + gz * z), t0, cens)

    if outcomes is None:
        outcomes = gen_outcome(rng, times, a, z, b, config.beta, config.sigma_eps2)

    if config.setting == "A":
        recorded = np.ones(len(times), dtype=bool)
    else:
        recorded = gen_observation(rng, len(times), a, z, config.alpha)

    latent = dict(eta=eta, visit_frailty=visit_frailty, b0=float(b[0]), b1=float(b[1]),
                  mechanism=mechanism)
    return a, z, np.asarray(times, dtype=float), recorded, np.asarray(outcomes, dtype=float), latent


def simulate(config: SimConfig, replicate: int = 0) -> SimulationOutput:
    """
    Generate one dataset together with its latent draws.

    Parameters
    ----------
    config : SimConfig
    replicate : int, optional
        Replication index; selects an independent family of subject streams.

    Returns
    -------
    SimulationOutput
        The panel, a per-subject frame of (eta, visit_frailty, b0, b1,
        mechanism), and the case 1-5 threshold when one was used.
    """
    uses_threshold = config.setting in ("A", "C") and config.mechanism_index in (4, 5)
    threshold = population_threshold(config) if uses_threshold else None

    ids, covs, latents = [], [], []
    ev_ids, ev_times, ev_recorded, ev_outcomes = [], [], [], []
    for i in range(config.n_subjects):
        rng = subject_rng(config.seed, replicate, i)
        a, z, times, recorded, outcomes, latent = _simulate_subject(config, rng, threshold)
        sid = str(i + 1)
        ids.append(sid)
        covs.append((a, z))
        latents.append(dict(subject_id=sid, **latent))
        ev_ids.append(np.full(len(times), sid, dtype=object))
        ev_times.append(times)
        ev_recorded.append(recorded)
        ev_outcomes.append(np.where(recorded, outcomes, np.nan))

    dataset = PanelDataset(
        subject_ids=ids,
        censoring_times=np.full(config.n_subjects, config.censoring_time),
        covariate_names=(EXPOSURE, CONFOUNDER),
        covariates=np.array(covs, dtype=float),
        event_subject_ids=np.concatenate(ev_ids),
        event_times=np.concatenate(ev_times),
        event_recorded=np.concatenate(ev_recorded),
        event_outcomes=np.concatenate(ev_outcomes),
        study_origin=config.t0,
    )
    logger.debug("case %s replicate %d: %d subjects, %d visits, %d recorded",
                 config.case_id, replicate, dataset.n_subjects, dataset.n_events,
                 int(dataset.event_recorded.sum()))
    return SimulationOutput(dataset=dataset, latent=pd.DataFrame(latents), threshold=threshold)


def generate(config: SimConfig, replicate: int = 0) -> PanelDataset:
    """Generate the panel for ``config``; deterministic in (config, replicate)."""
    return simulate(config, replicate).dataset


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=int(seed))
