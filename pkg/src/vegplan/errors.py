"""Exception taxonomy shared across the package.

Every error raised on purpose derives from :class:`VegplanError` so callers
can catch one base class at the CLI boundary and still branch on precise
subclasses in library code.
"""

from __future__ import annotations


class VegplanError(Exception):
    """Base class for all errors raised by this package."""


# --- data loading -----------------------------------------------------------

class DataError(VegplanError):
    """Base class for input-file problems."""


class EmptyFileError(DataError):
    """A required input file has a header but no data rows, or is empty."""


class MissingColumnError(DataError):
    """An input file lacks one of its required columns."""


class MalformedRowError(DataError):
    """A row holds a value that cannot be parsed as its declared type."""


class MalformedDateError(MalformedRowError):
    """A date or time field does not parse."""


class NegativePriceError(MalformedRowError):
    """A transaction unit price is negative."""


class NonpositivePriceError(MalformedRowError):
    """A wholesale quote is zero or negative."""


class NegativeQuantityError(MalformedRowError):
    """A transaction quantity is negative (zero is a legal no-op line)."""


class OutOfRangeLossError(MalformedRowError):
    """A loss rate falls outside [0, 100) percent."""


class DuplicateItemCodeError(DataError):
    """The same item code appears twice in the catalog or loss table."""


class DuplicateQuoteError(DataError):
    """Two wholesale quotes share the same (date, item) key."""


class UnknownItemCodeError(DataError):
    """A row references an item code absent from the catalog."""


class CategoryCountMismatchError(DataError):
    """An item code maps to more than one category across catalog rows."""


# --- analytics --------------------------------------------------------------

class AnalyticsError(VegplanError):
    """Base class for aggregation and correlation problems."""


class EmptyDatasetError(AnalyticsError):
    """The dataset holds no transactions to aggregate."""


class LengthMismatchError(AnalyticsError):
    """Paired series passed to a correlation have different lengths."""


class ZeroVarianceError(AnalyticsError):
    """A series has zero variance, so a correlation is undefined."""


class InsufficientPeriodsError(AnalyticsError):
    """Fewer than two periods are available, so no co-movement exists."""


# --- demand modelling -------------------------------------------------------

class DemandError(VegplanError):
    """Base class for demand-curve fitting problems."""


class UnknownFamilyError(DemandError):
    """The requested curve family name is not recognised."""


class TooFewPointsError(DemandError):
    """Not enough price points to identify the requested family."""


class FitDivergedError(DemandError):
    """No parameter vector with finite squared error was found."""


class AllFitsFailedError(DemandError):
    """Every candidate family failed to fit."""


class DomainViolationError(DemandError):
    """A price lies outside the domain of the fitted curve."""


class NotDecreasingError(DemandError):
    """The fitted curve is not downward sloping, so it cannot be priced."""


# --- forecasting ------------------------------------------------------------

class ForecastError(VegplanError):
    """Base class for time-series problems."""


class NoDataError(ForecastError):
    """No observations exist to build a series from."""


class SeriesTooShortError(ForecastError):
    """The series is too short for the requested differencing or order."""


class InvalidOrderError(ForecastError):
    """An ARIMA order component is negative or non-integer."""


class NonStationaryFitError(ForecastError):
    """No admissible (stationary, invertible) coefficients were found."""


class NoConvergentFitError(ForecastError):
    """Every candidate order in the selection grid failed to fit."""


# --- planning ---------------------------------------------------------------

class PlanError(VegplanError):
    """Base class for replenishment planning problems."""


class LossOutOfRangeError(PlanError):
    """A loss fraction falls outside [0, 1)."""


class NoProfitablePriceError(PlanError):
    """Maximum attainable profit over the feasible prices is not positive."""


class EmptyIntervalError(PlanError):
    """The feasible price interval is empty."""


class EmptyFeasibleIntervalError(EmptyIntervalError):
    """An item's feasible price interval is empty (wholesale too high)."""


class EmptyWindowError(PlanError):
    """The candidate window contains no sale transactions."""


class PoolTooSmallError(PlanError):
    """Too few stockable candidates to satisfy the minimum count."""


class PoolTooLargeError(PlanError):
    """The pool is too large for exhaustive enumeration."""


class CategoryUncoverableError(PlanError):
    """Some required category has no stockable candidate."""


# --- pipeline / CLI ---------------------------------------------------------

class ConfigError(VegplanError):
    """A run configuration value is missing or inconsistent."""


class MalformedPlanFileError(VegplanError):
    """A plan artifact cannot be parsed back for auditing."""


class StageError(VegplanError):
    """Wraps a failure with the pipeline stage where it happened."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
