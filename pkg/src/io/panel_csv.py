"""
Two-file CSV format for panel data.

baselines.csv : ``subject_id,censoring_time,<cov1>,<cov2>,...``
events.csv    : ``subject_id,time,recorded,outcome``

``recorded`` is 0 or 1 and ``outcome`` is empty when ``recorded`` is 0.
Files are UTF-8 with LF line endings. Floats are written in shortest
round-trip form, so export followed by ingest reproduces every value.
"""

import logging
from typing import List

import numpy as np
import pandas as pd

from src.constants import STUDY_ORIGIN
from src.data_model import PanelDataset, validate
from src.exceptions import IngestError

logger = logging.getLogger(__name__)

BASELINE_KEYS = ["subject_id", "censoring_time"]
EVENT_COLUMNS = ["subject_id", "time", "recorded", "outcome"]


def _read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as err:
        raise IngestError(f"{path}: file is empty, a header row is required") from err
    except pd.errors.ParserError as err:
        raise IngestError(f"{path}: {err}") from err
    except UnicodeDecodeError as err:
        raise IngestError(f"{path}: not valid UTF-8 ({err})") from err


def _header(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        line = f.readline().rstrip("\r\n")
    return line.split(",") if line else []


def _parse_floats(frame: pd.DataFrame, column: str, path: str,
                  allow_empty: bool = True) -> np.ndarray:
    """Parse a text column to floats; '' becomes NaN. Line numbers count the header."""
    values = np.empty(len(frame))
    for row, text in enumerate(frame[column]):
        text = text.strip()
        if text == "":
            if not allow_empty:
                raise IngestError(f"{path}, line {row + 2}: empty value in column '{column}'")
            values[row] = np.nan
            continue
        try:
            values[row] = float(text)
        except ValueError:
            raise IngestError(f"{path}, line {row + 2}: column '{column}' "
                              f"expects a number, got '{text}'") from None
    return values


def _parse_flags(frame: pd.DataFrame, path: str) -> np.ndarray:
    flags = np.empty(len(frame), dtype=bool)
    for row, text in enumerate(frame["recorded"]):
        text = text.strip()
        if text not in ("0", "1"):
            raise IngestError(f"{path}, line {row + 2}: column 'recorded' "
                              f"expects 0 or 1, got '{text}'")
        flags[row] = text == "1"
    return flags


def ingest_csv(baseline_path: str,
               events_path: str,
               study_origin: float = STUDY_ORIGIN) -> PanelDataset:
    """
    Read and validate a panel from the two-file CSV schema.

    Parameters
    ----------
    baseline_path : str
        Path to baselines.csv
    events_path : str
        Path to events.csv
    study_origin : float, optional
        Time origin of the study

    Returns
    -------
    PanelDataset
        Events sorted by (subject, time).

    Raises
    ------
    IngestError
        On parse errors (with line number) or header mismatch.
    DataValidationError
        If the parsed panel violates an invariant (e.g. unknown-subject).
    """
    header = _header(baseline_path)
    if header[:2] != BASELINE_KEYS:
        raise IngestError(f"{baseline_path}: header must start with "
                          f"{','.join(BASELINE_KEYS)}, got {','.join(header)}")
    if len(set(header)) != len(header):
        raise IngestError(f"{baseline_path}: duplicate column names in header")

    events_header = _header(events_path)
    if events_header != EVENT_COLUMNS:
        raise IngestError(f"{events_path}: header must be {','.join(EVENT_COLUMNS)}, "
                          f"got {','.join(events_header)}")

    baselines = _read_table(baseline_path)
    events = _read_table(events_path)

    covariate_names = tuple(header[2:])
    covariates = np.column_stack(
        [_parse_floats(baselines, name, baseline_path) for name in covariate_names]
    ) if covariate_names else np.zeros((len(baselines), 0))

    dataset = PanelDataset(
        subject_ids=baselines["subject_id"].str.strip().to_numpy(),
        censoring_times=_parse_floats(baselines, "censoring_time", baseline_path,
                                      allow_empty=False),
        covariate_names=covariate_names,
        covariates=covariates,
        event_subject_ids=events["subject_id"].str.strip().to_numpy(),
        event_times=_parse_floats(events, "time", events_path, allow_empty=False),
        event_recorded=_parse_flags(events, events_path),
        event_outcomes=_parse_floats(events, "outcome", events_path),
        study_origin=study_origin,
    )
    validate(dataset).raise_if_failed()
    logger.info("ingested %d subjects and %d events (%d recorded) from %s, %s",
                dataset.n_subjects, dataset.n_events, int(dataset.event_recorded.sum()),
                baseline_path, events_path)
    return dataset


def export_csv(dataset: PanelDataset, baseline_path: str, events_path: str) -> None:
    """
    Write a dataset in the two-file CSV schema.

    Output is deterministic: rows follow the dataset's (subject, time)
    order and floats use their shortest round-trip representation.

    Raises
    ------
    DataValidationError
        If the dataset does not validate.
    OSError
        On write failure.
    """
    validate(dataset).raise_if_failed()

    baselines = pd.DataFrame({"subject_id": dataset.subject_ids,
                              "censoring_time": dataset.censoring_times})
    for j, name in enumerate(dataset.covariate_names):
        baselines[name] = dataset.covariates[:, j]

    events = pd.DataFrame({
        "subject_id": dataset.event_subject_ids,
        "time": dataset.event_times,
        "recorded": dataset.event_recorded.astype(int),
        "outcome": dataset.event_outcomes,
    }, columns=EVENT_COLUMNS)

    options = dict(index=False, na_rep="", lineterminator="\n", encoding="utf-8")
    baselines.to_csv(baseline_path, **options)
    events.to_csv(events_path, **options)
    logger.debug("exported %d subjects to %s and %d events to %s",
                 dataset.n_subjects, baseline_path, dataset.n_events, events_path)
