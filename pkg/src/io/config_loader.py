"""
Configuration file loader for simulation, design and benchmark parameters.
"""

import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Optional, Sequence, Tuple

import yaml

from src.constants import MIN_BOOT
from src.data_model import DesignSpec
from src.estimators import METHODS
from src.exceptions import ConfigError
from src.simgen import CASES, SimConfig, VisitParams

SEED_ENV = "EHRJOINT_SEED"

ALL_CASES = tuple(case for cases in CASES.values() for case in cases)

_DESIGN_KEYS = {"w_names", "v_names", "x_names", "z_names", "include_time_fixed_effect",
                "v_intercept"}


def load_config(filename: str) -> Dict[str, Any]:
    """
    Load a configuration mapping from a YAML or JSON file.

    Parameters
    ----------
    filename : str
        Path to the configuration file

    Returns
    -------
    dict
        Configuration dictionary

    Raises
    ------
    ConfigError
        If the file cannot be parsed or is not a mapping
    """
    try:
        with open(filename, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as err:
        raise ConfigError(f"{filename}: not valid YAML/JSON ({err})") from err
    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError(f"{filename}: top level must be a mapping")
    return config


def seed_override(seed: Optional[int]) -> Optional[int]:
    """Seed from ``EHRJOINT_SEED`` when set, else ``seed``."""
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return seed
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"{SEED_ENV} must be an integer, got '{value}'") from err


def _check_keys(config: Dict[str, Any], allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(config) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}; allowed: {sorted(allowed)}")


def sim_config_from_dict(config: Dict[str, Any]) -> SimConfig:
    """
    Build a SimConfig, raising ConfigError that names the offending field.
    """
    allowed = [f.name for f in fields(SimConfig)]
    _check_keys(config, allowed, "simulation config")
    if "case_id" not in config:
        raise ConfigError("case_id: required parameter missing from config")
    config = dict(config)
    config["case_id"] = str(config["case_id"])
    if config["case_id"] not in ALL_CASES:
        raise ConfigError(f"case_id: unknown case '{config['case_id']}'; "
                          f"expected one of {list(ALL_CASES)}")
    gamma = config.get("gamma")
    if isinstance(gamma, dict):
        _check_keys(gamma, [f.name for f in fields(VisitParams)], "gamma")
    try:
        return SimConfig(**config)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"simulation config: {err}") from err


def design_from_dict(config: Dict[str, Any]) -> DesignSpec:
    """Build a DesignSpec from a mapping of name lists."""
    _check_keys(config, _DESIGN_KEYS, "design")
    values = {}
    for key in ("w_names", "v_names", "x_names", "z_names"):
        names = config.get(key, [])
        if isinstance(names, str) or not isinstance(names, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of covariate names")
        values[key] = tuple(str(n) for n in names)
    time_flag = config.get("include_time_fixed_effect")
    if time_flag is not None and not isinstance(time_flag, bool):
        raise ConfigError("include_time_fixed_effect: expected true, false or null")
    intercept = config.get("v_intercept", True)
    if not isinstance(intercept, bool):
        raise ConfigError("v_intercept: expected true or false")
    return DesignSpec(include_time_fixed_effect=time_flag, v_intercept=intercept, **values)


@dataclass(frozen=True)
class BenchmarkConfig:
    """
    One benchmark run: cases, methods and replication controls.

    ``simulation`` holds SimConfig overrides shared by every case. When
    ``n_boot`` is set, each case also gets a bootstrap coverage study with
    that many resamples per replication.
    """

    cases: Tuple[str, ...]
    methods: Tuple[str, ...]
    n_reps: int
    seed: int = 0
    simulation: Tuple[Tuple[str, Any], ...] = ()
    design: Optional[DesignSpec] = None
    n_boot: Optional[int] = None
    coefficient: str = "A"

    def sim_config(self, case_id: str) -> SimConfig:
        return sim_config_from_dict({**dict(self.simulation), "case_id": case_id,
                                     "seed": self.seed})


def benchmark_config_from_dict(config: Dict[str, Any]) -> BenchmarkConfig:
    """
    Validate a benchmark mapping.

    Cases come from ``cases`` or, when absent, every case of ``setting``.
    """
    _check_keys(config, ["setting", "cases", "methods", "n_reps", "seed", "simulation",
                         "design", "n_boot", "coefficient"], "benchmark config")
    cases = config.get("cases")
    if cases is None:
        setting = config.get("setting")
        if setting is None:
            raise ConfigError("cases: give a list of case ids or a setting")
        cases = CASES.get(str(setting), ())
        if not cases:
            raise ConfigError(f"setting: unknown setting '{setting}'")
    cases = tuple(str(c) for c in cases)
    for case in cases:
        if case not in ALL_CASES:
            raise ConfigError(f"cases: unknown case '{case}'")

    methods = tuple(str(m).lower() for m in config.get("methods", ()))
    if not methods:
        raise ConfigError("methods: at least one method is required")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"methods: unknown method '{method}'; available: {METHODS}")

    for key in ("n_reps", "n_boot", "seed"):
        if key in config and not isinstance(config[key], int):
            raise ConfigError(f"{key}: expected an integer")
    n_reps = config.get("n_reps")
    if n_reps is None:
        raise ConfigError("n_reps: required parameter missing from config")
    if n_reps < 2:
        raise ConfigError("n_reps must be at least 2")
    n_boot = config.get("n_boot")
    if n_boot is not None and n_boot < MIN_BOOT:
        raise ConfigError(f"n_boot must be at least {MIN_BOOT}, got {n_boot}")

    simulation = config.get("simulation", {}) or {}
    if not isinstance(simulation, dict):
        raise ConfigError("simulation: expected a mapping of SimConfig fields")
    for reserved in ("case_id", "setting", "seed"):
        if reserved in simulation:
            raise ConfigError(f"simulation.{reserved}: set at the benchmark level")
    design = config.get("design")
    seed = seed_override(config.get("seed", 0))
    benchmark = BenchmarkConfig(
        cases=cases,
        methods=methods,
        n_reps=n_reps,
        seed=seed,
        simulation=tuple(sorted(simulation.items())),
        design=design_from_dict(design) if design is not None else None,
        n_boot=n_boot,
        coefficient=str(config.get("coefficient", "A")),
    )
    for case in cases:
        benchmark.sim_config(case)
    return benchmark
