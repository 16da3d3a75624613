"""Exception hierarchy.

Every error raised by the toolkit derives from ``GaitError`` so the CLI can map
families of failures onto stable exit codes.
"""


class GaitError(Exception):
    """Base class for all toolkit errors."""


class DataError(GaitError):
    """Input data is malformed or violates a domain invariant (exit code 2)."""


class NumericalError(GaitError):
    """A computation could not produce a valid number (exit code 3)."""


# --- core model / ingestion -------------------------------------------------

class NonUnitQuaternion(NumericalError):
    pass


class ValidationError(DataError):
    pass


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class SyncError(DataError):
    pass


class NotStationary(DataError):
    pass


# --- orientation / filtering -----------------------------------------------

class UnsupportedRate(DataError):
    pass


# --- features ----------------------------------------------------------------

class EmptySignal(DataError):
    pass


class ZeroVariance(NumericalError):
    pass


class NoPeriodicity(NumericalError):
    pass


class SignalTooShort(DataError):
    pass


class WindowTooLong(DataError):
    pass


class FeatureExtractionError(NumericalError):
    """One or more features of a trial could not be computed.

    ``failures`` maps the feature column name to the underlying exception.
    """

    def __init__(self, failures, trial=None):
        self.failures = dict(failures)
        self.trial = trial
        names = ", ".join(sorted(self.failures)[:5])
        more = "" if len(self.failures) <= 5 else f" (+{len(self.failures) - 5} more)"
        where = f"{trial}: " if trial else ""
        super().__init__(f"{where}{len(self.failures)} feature(s) failed: {names}{more}")


# --- selection / classification / grading -----------------------------------

class DegenerateGroups(NumericalError):
    pass


class ZeroSpread(NumericalError):
    pass


class NoSignificantFeatures(NumericalError):
    pass


class SingularScatter(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyTestSet(DataError):
    pass


class InsufficientData(DataError):
    pass


class ModelVersionError(DataError):
    pass


class InvalidProfile(DataError):
    pass
