"""
Exception hierarchy and the process exit code attached to each error.
"""


class EHRJointError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1


class ConfigError(EHRJointError, ValueError):
    """A configuration file or option is malformed."""

    exit_code = 2


class IngestError(EHRJointError, ValueError):
    """A CSV file cannot be parsed or does not match the schema."""

    exit_code = 3


class DataValidationError(EHRJointError, ValueError):
    """A dataset violates one or more panel invariants."""

    exit_code = 4

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class EstimationError(EHRJointError, RuntimeError):
    """A fitter could not produce an estimate for the given data."""


class NonIdentifiableError(EstimationError):
    """Centered covariates vanish over every event."""

    exit_code = 5


class TimeNotIdentifiableError(EHRJointError, ValueError):
    """Time was requested as a fixed effect for a centered estimating equation."""

    exit_code = 6


class NotConvergedError(EstimationError):
    exit_code = 7


class SeparationError(EstimationError):
    """Logistic coefficients diverge (monotone likelihood)."""

    exit_code = 8


class DegenerateError(EstimationError):
    """The recording indicator is constant over all visits."""

    exit_code = 9


class SingularSystemError(EstimationError):
    exit_code = 10


class CollinearError(EstimationError):
    """The fixed-effect design is rank deficient."""

    exit_code = 11


class ZeroExposureError(EstimationError):
    exit_code = 12


class InsufficientDataError(EstimationError):
    exit_code = 13


class TooFewBootError(EHRJointError, ValueError):
    exit_code = 14


class AllResamplesFailedError(EHRJointError, RuntimeError):
    exit_code = 15


IO_EXIT_CODE = 16
