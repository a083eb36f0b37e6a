"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, FormatError -> 2,
NumericalError -> 3.
"""


class SeqScreenError(Exception):
    """Base class for all seqscreen errors."""


class UsageError(SeqScreenError):
    """Bad command-line arguments or inconsistent configuration."""


class FormatError(SeqScreenError):
    """Unreadable or malformed data file."""


class DimensionError(FormatError):
    """Shapes of the supplied operands do not agree."""


class NumericalError(SeqScreenError):
    """A numerical invariant failed at runtime."""


class RegionError(NumericalError):
    """A bounding region is degenerate or has empty interior."""


class FeasibilityError(NumericalError):
    """A dual candidate violates the feasibility constraints."""


class IntegrityError(NumericalError):
    """A safe-screening guarantee was violated; the run is not trustworthy."""
