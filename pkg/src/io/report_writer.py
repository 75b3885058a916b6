"""
CSV and JSON writers for command outputs.

JSON is written with sorted keys and NaN mapped to null; CSV through pandas
with LF line endings, so rerunning a command with the same inputs rewrites
the same bytes.
"""

import hashlib
import json
import math
import os
import time
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.constants import EXPOSURE
from src.exceptions import IngestError
from src.inference import REPORT_COLUMNS, BootstrapResult, CoverageReport, ReplicationReport
from src.joint_estimators import JointFitResult
from src.lme import LmeFit

METRICS = (("bias_x100", "Bias"), ("sd_x100", "SD"), ("rmse_x100", "RMSE"))


def jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays to plain Python; NaN and inf become None."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: str, payload: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def write_frame(path: str, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, na_rep="", lineterminator="\n", encoding="utf-8")


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def inputs_digest(paths: Sequence[str], extra: Optional[Mapping[str, Any]] = None) -> str:
    """
    SHA-256 over every input file, in the given order, plus canonical JSON of
    ``extra`` (effective seed, command-line options).
    """
    digest = hashlib.sha256()
    for path in paths:
        digest.update(os.path.basename(path).encode("utf-8"))
        digest.update(file_digest(path).encode("ascii"))
    if extra:
        canon = json.dumps(jsonable(extra), sort_keys=True, separators=(",", ":"))
        digest.update(canon.encode("utf-8"))
    return digest.hexdigest()


def estimates_frame(estimates: Dict[str, float],
                    boot: Optional[BootstrapResult] = None) -> pd.DataFrame:
    """estimates.csv: one row per coefficient, bootstrap columns when given."""
    frame = pd.DataFrame({"coefficient": list(estimates),
                          "estimate": [float(v) for v in estimates.values()]})
    if boot is not None:
        lookup = {n: i for i, n in enumerate(boot.names)}
        for column, values in (("se", boot.se), ("ci_lower", boot.ci_lower),
                               ("ci_upper", boot.ci_upper)):
            frame[column] = [float(values[lookup[n]]) for n in frame["coefficient"]]
    return frame


def diagnostics_of(method: str, fit: Any, boot: Optional[BootstrapResult] = None) -> Dict:
    """Nuisance estimates and numerical diagnostics of one fit."""
    info: Dict[str, Any] = {"method": method}
    if isinstance(fit, JointFitResult):
        visit = fit.visit_fit
        info.update(
            condition_number=fit.condition_number,
            counting_process=fit.counting_process,
            n_terms=fit.n_terms,
            theta=fit.theta_coefficients() or None,
            visit_model={
                "gamma": dict(zip(visit.w_names, visit.gamma)),
                "sigma_eta2": visit.sigma_eta2,
                "sigma_eta2_unclamped": visit.sigma_eta2_unclamped,
                "iterations": visit.iterations,
                "converged": visit.converged,
            },
            obs_model=None if fit.obs_fit is None else {
                "alpha": dict(zip(fit.obs_fit.names, fit.obs_fit.alpha)),
                "iterations": fit.obs_fit.iterations,
                "converged": fit.obs_fit.converged,
            },
        )
    elif isinstance(fit, LmeFit):
        info.update(variant=fit.variant, sigma_b=fit.sigma_b, sigma_eps2=fit.sigma_eps2,
                    loglik=fit.loglik, converged=fit.converged,
                    n_evaluations=fit.n_evaluations)
    if boot is not None:
        info["bootstrap"] = {"n_boot": boot.n_boot, "n_failed": boot.n_failed,
                             "level": boot.level}
    return info


def report_payload(case_id: str, report: ReplicationReport) -> Dict:
    return {"case_id": case_id, **report.to_dict()}


def combined_table(frames: Mapping[str, pd.DataFrame], coefficient: str = EXPOSURE) -> pd.DataFrame:
    """
    Cross-case table: rows (method, metric), one column per case id.

    ``frames`` maps case id to a report.csv frame; values stay scaled by 100.
    """
    methods: List[str] = []
    for frame in frames.values():
        for method in frame["method"]:
            if method not in methods:
                methods.append(method)
    rows = []
    for method in methods:
        for column, label in METRICS:
            row = {"method": method, "metric": label}
            for case_id, frame in frames.items():
                match = frame[(frame["method"] == method) & (frame["coefficient"] == coefficient)]
                row[case_id] = float(match[column].iloc[0]) if len(match) else float("nan")
            rows.append(row)
    return pd.DataFrame(rows, columns=["method", "metric", *frames])


def coverage_table(reports: Sequence[CoverageReport]) -> pd.DataFrame:
    """One row per (method, coefficient) with the empirical interval coverage."""
    rows = [{"method": r.method, "coefficient": name, "coverage": value, "level": r.level,
             "n_boot": r.n_boot, "n_success": r.n_success, "failures": r.failures}
            for r in reports for name, value in r.coverage.items()]
    return pd.DataFrame(rows, columns=["method", "coefficient", "coverage", "level", "n_boot",
                                       "n_success", "failures"])


def read_report(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"method": str, "coefficient": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise IngestError(f"{path}: unreadable report table: {err}") from err
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise IngestError(f"{path}: missing report column(s) {missing}")
    return frame


class RunWriter:
    """
    Writer for one command's output directory.

    Keeps the list of files written so the manifest can name them.
    """

    def __init__(self, out_dir: str, command: str):
        self.out_dir = out_dir
        self.command = command
        self.outputs: List[str] = []
        self.started = time.time()
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        full = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def json(self, name: str, payload: Any) -> str:
        path = self.path(name)
        write_json(path, payload)
        self.outputs.append(name)
        return path

    def frame(self, name: str, frame: pd.DataFrame) -> str:
        path = self.path(name)
        write_frame(path, frame)
        self.outputs.append(name)
        return path

    def record(self, name: str) -> None:
        """Register a file written by another writer."""
        self.outputs.append(name)

    def manifest(self, inputs: Sequence[str], seed: Optional[int], version: str,
                 options: Optional[Mapping[str, Any]] = None) -> str:
        """
        Write manifest.json: command, input hash, effective seed, version,
        wall-clock seconds and the outputs written so far.
        """
        payload = {
            "command": self.command,
            "config_hash": inputs_digest(inputs, {"seed": seed, **(options or {})}),
            "inputs": [os.path.basename(p) for p in inputs],
            "seed": seed,
            "version": version,
            "wall_clock_seconds": round(time.time() - self.started, 3),
            "outputs": sorted(self.outputs),
        }
        path = self.path("manifest.json")
        write_json(path, payload)
        return path
