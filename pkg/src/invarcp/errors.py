"""Exception types raised across the package."""


class InvarcpError(Exception):
    """Base class for all errors raised by this package."""


class MissingColumn(InvarcpError):
    """A required column is absent from the input table."""


class NonNumericValue(InvarcpError):
    """A predictor or target cell is missing, NaN or infinite."""


class SingleRow(InvarcpError):
    """The input table has fewer than two rows."""


class InvalidPartition(InvarcpError):
    """An environment grouping does not partition the label set."""


class UnknownColumn(InvarcpError):
    """A referenced column name does not exist."""


class RankDeficient(InvarcpError):
    """A regression design matrix is (numerically) rank deficient."""


class TooFewRows(InvarcpError):
    """Not enough rows for the requested regression."""


class EnvironmentTooSmall(InvarcpError):
    """An environment (or its complement) has too few rows for a test."""


class TooFewSamples(InvarcpError):
    """A two-sample test received samples below its minimum size."""


class DomainError(InvarcpError):
    """A distribution function argument is outside its domain."""


class InfeasibleConfig(InvarcpError):
    """A configuration value is out of range or self-contradictory."""


class TargetIntervened(InvarcpError):
    """An intervention was requested on the target node without override."""


class GridTooLarge(InvarcpError):
    """A coefficient grid search would exceed the evaluation budget."""


class UnknownFixture(InvarcpError):
    """An unrecognised fixture name was requested."""
