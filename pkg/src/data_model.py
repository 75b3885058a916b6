"""
In-memory representation of irregular longitudinal EHR panel data.

A panel holds one baseline row per subject (covariates and censoring time)
and a stream of visit events. Each visit carries a recording flag and, when
the biomarker was recorded, its value. Storage is columnar so that the
estimators can work on arrays directly; record views are available through
``baselines`` and ``events``.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.constants import COUNT, INTERCEPT, STUDY_ORIGIN, TIME
from src.exceptions import ConfigError, DataValidationError


@dataclass(frozen=True)
class SubjectBaseline:
    """Baseline covariates and administrative censoring time of one subject."""

    subject_id: str
    covariates: Mapping[str, float]
    censoring_time: float


@dataclass(frozen=True)
class VisitEvent:
    """One clinic visit. ``outcome`` is present iff ``recorded`` is true."""

    subject_id: str
    time: float
    recorded: bool
    outcome: Optional[float] = None


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subject_id: Optional[str] = None
    row: Optional[int] = None

    def __str__(self) -> str:
        where = []
        if self.subject_id is not None:
            where.append(f"subject {self.subject_id}")
        if self.row is not None:
            where.append(f"event row {self.row}")
        location = f" ({', '.join(where)})" if where else ""
        return f"{self.code}{location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`; empty ``violations`` means pass."""

    violations: Tuple[Violation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]

    def raise_if_failed(self) -> None:
        if not self.passed:
            raise DataValidationError(self)

    def __str__(self) -> str:
        if self.passed:
            return "pass"
        lines = [f"{len(self.violations)} violation(s):"]
        lines.extend(f"  {v}" for v in self.violations)
        return "\n".join(lines)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """
    Immutable panel of baselines and visit events.

    Events are normalized on construction: sorted by the position of their
    subject in the baseline order, then by time. Malformed content is kept
    as is so that :func:`validate` can report it.

    Parameters
    ----------
    subject_ids : array-like of str, shape (n,)
    censoring_times : array-like of float, shape (n,)
    covariate_names : sequence of str, length p
    covariates : array-like of float, shape (n, p)
    event_subject_ids : array-like of str, shape (m,)
    event_times : array-like of float, shape (m,)
    event_recorded : array-like of bool, shape (m,)
    event_outcomes : array-like of float, shape (m,)
        NaN marks an absent outcome.
    study_origin : float, optional
        Time origin t0; every event must fall after it.
    """

    subject_ids: np.ndarray
    censoring_times: np.ndarray
    covariate_names: Tuple[str, ...]
    covariates: np.ndarray
    event_subject_ids: np.ndarray
    event_times: np.ndarray
    event_recorded: np.ndarray
    event_outcomes: np.ndarray
    study_origin: float = STUDY_ORIGIN
    event_subject_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ids = np.array([str(s) for s in self.subject_ids], dtype=object)
        n = len(ids)
        names = tuple(str(name) for name in self.covariate_names)
        cov = np.asarray(self.covariates, dtype=float).reshape(n, len(names))
        cens = np.asarray(self.censoring_times, dtype=float).reshape(n)

        ev_ids = np.array([str(s) for s in self.event_subject_ids], dtype=object)
        m = len(ev_ids)
        times = np.asarray(self.event_times, dtype=float).reshape(m)
        recorded = np.asarray(self.event_recorded, dtype=bool).reshape(m)
        outcomes = np.asarray(self.event_outcomes, dtype=float).reshape(m)

        position = {}
        for k, sid in enumerate(ids):
            position.setdefault(sid, k)
        index = np.array([position.get(sid, -1) for sid in ev_ids], dtype=np.int64)

        # unknown subjects sort after every known one
        sort_key = np.where(index < 0, n, index)
        order = np.lexsort((times, sort_key))

        object.__setattr__(self, "subject_ids", _frozen(ids))
        object.__setattr__(self, "censoring_times", _frozen(cens))
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "covariates", _frozen(cov))
        object.__setattr__(self, "event_subject_ids", _frozen(ev_ids[order]))
        object.__setattr__(self, "event_times", _frozen(times[order]))
        object.__setattr__(self, "event_recorded", _frozen(recorded[order]))
        object.__setattr__(self, "event_outcomes", _frozen(outcomes[order]))
        object.__setattr__(self, "event_subject_index", _frozen(index[order]))
        object.__setattr__(self, "study_origin", float(self.study_origin))

    @classmethod
    def from_records(cls,
                     baselines: Iterable[SubjectBaseline],
                     events: Iterable[VisitEvent],
                     study_origin: float = STUDY_ORIGIN) -> "PanelDataset":
        """
        Build a dataset from record objects.

        Covariate names are the union over subjects in first-seen order; a
        subject lacking a name gets NaN there, which validation reports.
        """
        baselines = list(baselines)
        events = list(events)
        names: List[str] = []
        for b in baselines:
            for name in b.covariates:
                if name not in names:
                    names.append(name)
        cov = np.array([[float(b.covariates.get(name, np.nan)) for name in names]
                        for b in baselines], dtype=float).reshape(len(baselines), len(names))
        outcomes = [np.nan if e.outcome is None else float(e.outcome) for e in events]
        return cls(
            subject_ids=[b.subject_id for b in baselines],
            censoring_times=[b.censoring_time for b in baselines],
            covariate_names=tuple(names),
            covariates=cov,
            event_subject_ids=[e.subject_id for e in events],
            event_times=[e.time for e in events],
            event_recorded=[bool(e.recorded) for e in events],
            event_outcomes=outcomes,
            study_origin=study_origin,
        )

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_events(self) -> int:
        return len(self.event_times)

    @property
    def tau(self) -> float:
        """Maximum follow-up time."""
        if self.n_subjects == 0:
            return self.study_origin
        return float(np.max(self.censoring_times))

    @property
    def baselines(self) -> Tuple[SubjectBaseline, ...]:
        return tuple(
            SubjectBaseline(subject_id=sid,
                            covariates=dict(zip(self.covariate_names, map(float, row))),
                            censoring_time=float(c))
            for sid, row, c in zip(self.subject_ids, self.covariates, self.censoring_times)
        )

    @property
    def events(self) -> Tuple[VisitEvent, ...]:
        return tuple(
            VisitEvent(subject_id=sid, time=float(t), recorded=bool(r),
                       outcome=None if np.isnan(y) else float(y))
            for sid, t, r, y in zip(self.event_subject_ids, self.event_times,
                                    self.event_recorded, self.event_outcomes)
        )

    def visit_counts(self) -> np.ndarray:
        """n_i: number of visits per subject, recorded or not."""
        known = self.event_subject_index[self.event_subject_index >= 0]
        return np.bincount(known, minlength=self.n_subjects)

    def recorded_counts(self) -> np.ndarray:
        """o_i: number of recorded measurements per subject."""
        mask = (self.event_subject_index >= 0) & self.event_recorded
        return np.bincount(self.event_subject_index[mask], minlength=self.n_subjects)

    def covariate_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Baseline covariate columns in the order of ``names``."""
        columns = []
        for name in names:
            if name not in self.covariate_names:
                raise ConfigError(f"unknown covariate '{name}'; "
                                  f"available: {list(self.covariate_names)}")
            columns.append(self.covariates[:, self.covariate_names.index(name)])
        if not columns:
            return np.zeros((self.n_subjects, 0))
        return np.column_stack(columns)

    def _with_events(self, mask: np.ndarray) -> "PanelDataset":
        return PanelDataset(
            subject_ids=self.subject_ids,
            censoring_times=self.censoring_times,
            covariate_names=self.covariate_names,
            covariates=self.covariates,
            event_subject_ids=self.event_subject_ids[mask],
            event_times=self.event_times[mask],
            event_recorded=self.event_recorded[mask],
            event_outcomes=self.event_outcomes[mask],
            study_origin=self.study_origin,
        )

    def measurements_only(self) -> "PanelDataset":
        """The measurement process: drop visits whose biomarker was not recorded."""
        return self._with_events(self.event_recorded.copy())

    def resample(self, indices: Sequence[int]) -> "PanelDataset":
        """
        Draw subjects by position, carrying their full visit histories.

        Subjects are renumbered ``"1"..."n"`` in draw order so repeated draws
        stay distinct.
        """
        indices = np.asarray(indices, dtype=np.int64)
        new_ids = np.array([str(k + 1) for k in range(len(indices))], dtype=object)
        valid = self.event_subject_index >= 0
        event_rows = np.flatnonzero(valid)
        by_subject: Dict[int, np.ndarray] = {}
        if len(event_rows):
            owners = self.event_subject_index[event_rows]
            splits = np.flatnonzero(np.diff(owners)) + 1
            for chunk in np.split(event_rows, splits):
                by_subject[int(self.event_subject_index[chunk[0]])] = chunk
        empty = np.zeros(0, dtype=np.int64)
        rows = [by_subject.get(int(i), empty) for i in indices]
        owner_ids = np.concatenate([np.repeat(new_ids[k:k + 1], len(r))
                                    for k, r in enumerate(rows)]) if rows else new_ids[:0]
        take = np.concatenate(rows) if rows else empty
        return PanelDataset(
            subject_ids=new_ids,
            censoring_times=self.censoring_times[indices],
            covariate_names=self.covariate_names,
            covariates=self.covariates[indices],
            event_subject_ids=owner_ids,
            event_times=self.event_times[take],
            event_recorded=self.event_recorded[take],
            event_outcomes=self.event_outcomes[take],
            study_origin=self.study_origin,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (self.study_origin == other.study_origin
                and self.covariate_names == other.covariate_names
                and np.array_equal(self.subject_ids, other.subject_ids)
                and np.array_equal(self.censoring_times, other.censoring_times)
                and np.array_equal(self.covariates, other.covariates, equal_nan=True)
                and np.array_equal(self.event_subject_ids, other.event_subject_ids)
                and np.array_equal(self.event_times, other.event_times)
                and np.array_equal(self.event_recorded, other.event_recorded)
                and np.array_equal(self.event_outcomes, other.event_outcomes, equal_nan=True))

    __hash__ = None


def validate(dataset: PanelDataset) -> ValidationReport:
    """
    Check every panel invariant and collect all violations.

    Never raises on malformed content and never mutates the dataset.

    Parameters
    ----------
    dataset : PanelDataset

    Returns
    -------
    ValidationReport
        Empty when the dataset is well formed.
    """
    found: List[Violation] = []
    ids = dataset.subject_ids
    origin = dataset.study_origin

    seen = set()
    for sid in ids:
        if sid in seen:
            found.append(Violation("duplicate-subject-id", "subject id appears twice", sid))
        seen.add(sid)

    cens = dataset.censoring_times
    for k in np.flatnonzero(~np.isfinite(cens)):
        found.append(Violation("nonfinite-censoring-time",
                               f"censoring time {cens[k]}", ids[k]))
    for k in np.flatnonzero(np.isfinite(cens) & (cens <= origin)):
        found.append(Violation("censoring-before-origin",
                               f"censoring time {cens[k]} <= study origin {origin}", ids[k]))

    bad_cov = ~np.isfinite(dataset.covariates)
    for k, j in zip(*np.nonzero(bad_cov)):
        found.append(Violation("nonfinite-covariate",
                               f"covariate '{dataset.covariate_names[j]}' is missing "
                               f"or non-finite", ids[k]))

    index = dataset.event_subject_index
    times = dataset.event_times
    recorded = dataset.event_recorded
    outcomes = dataset.event_outcomes
    ev_ids = dataset.event_subject_ids
    known = index >= 0

    for row in np.flatnonzero(~known):
        found.append(Violation("unknown-subject", "event references an unknown subject",
                               ev_ids[row], int(row)))
    for row in np.flatnonzero(~np.isfinite(times)):
        found.append(Violation("nonfinite-event-time", f"time {times[row]}",
                               ev_ids[row], int(row)))
    for row in np.flatnonzero(np.isfinite(times) & (times <= origin)):
        found.append(Violation("event-before-origin",
                               f"time {times[row]} <= study origin {origin}",
                               ev_ids[row], int(row)))

    limit = np.full(len(times), np.inf)
    limit[known] = cens[index[known]]
    for row in np.flatnonzero(known & (times > limit)):
        found.append(Violation("event-after-censoring",
                               f"time {times[row]} > censoring time {limit[row]}",
                               ev_ids[row], int(row)))

    if len(times) > 1:
        same_subject = (ev_ids[1:] == ev_ids[:-1]) & known[1:]
        tied = same_subject & (times[1:] == times[:-1])
        for row in np.flatnonzero(tied) + 1:
            found.append(Violation("duplicate-event-time",
                                   f"two visits at time {times[row]}",
                                   ev_ids[row], int(row)))

    absent = np.isnan(outcomes)
    for row in np.flatnonzero(recorded & absent):
        found.append(Violation("outcome-missing-at-recorded-visit",
                               "recorded visit without an outcome", ev_ids[row], int(row)))
    for row in np.flatnonzero(~recorded & ~absent):
        found.append(Violation("outcome-present-at-unrecorded-visit",
                               "unrecorded visit carries an outcome", ev_ids[row], int(row)))
    for row in np.flatnonzero(np.isinf(outcomes)):
        found.append(Violation("nonfinite-outcome", f"outcome {outcomes[row]}",
                               ev_ids[row], int(row)))

    return ValidationReport(tuple(found))


RESERVED_NAMES = (INTERCEPT, TIME, COUNT)


@dataclass(frozen=True)
class DesignSpec:
    """
    Which baseline covariates enter each sub-model.

    Parameters
    ----------
    w_names : covariates of the visiting model.
    v_names : covariates of the observation model; an intercept is added
        unless ``v_intercept`` is false.
    x_names : fixed effects of the longitudinal model.
    z_names : subset of ``x_names`` carrying random effects.
    include_time_fixed_effect : None means the method default (time for the
        mixed models and IIRR, no time for the centered estimating equations);
        True forces time into X, which the centered equations reject.
    """

    w_names: Tuple[str, ...] = ()
    v_names: Tuple[str, ...] = ()
    x_names: Tuple[str, ...] = ()
    z_names: Tuple[str, ...] = ()
    include_time_fixed_effect: Optional[bool] = None
    v_intercept: bool = True

    def __post_init__(self):
        for attr in ("w_names", "v_names", "x_names", "z_names"):
            names = tuple(getattr(self, attr))
            object.__setattr__(self, attr, names)
            if len(set(names)) != len(names):
                raise ConfigError(f"{attr} contains duplicates: {list(names)}")
            for name in names:
                if name in RESERVED_NAMES:
                    raise ConfigError(f"{attr}: '{name}' is a reserved column name")
        missing = [z for z in self.z_names if z not in self.x_names]
        if missing:
            raise ConfigError(f"z_names must be a subset of x_names; not in x_names: {missing}")

    def check_against(self, dataset: PanelDataset) -> None:
        """Raise ConfigError if any name does not resolve to a baseline covariate."""
        for attr in ("w_names", "v_names", "x_names", "z_names"):
            unknown = [n for n in getattr(self, attr) if n not in dataset.covariate_names]
            if unknown:
                raise ConfigError(f"{attr}: unknown covariate(s) {unknown}; "
                                  f"available: {list(dataset.covariate_names)}")
