"""Exception hierarchy shared across the toolkit.

Exit-code contract for the CLI: ConfigError maps to exit code 2, every
DataError to exit code 1.
"""


class UnerError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UnerError):
    """Bad, missing, or contradictory configuration."""


class DataError(UnerError):
    """Invalid input data."""


# -- taxonomy ---------------------------------------------------------------

class TaxonomyError(DataError):
    pass


class MissingRoot(TaxonomyError):
    pass


class DuplicateSibling(TaxonomyError):
    pass


class DepthExceeded(TaxonomyError):
    pass


class IllegalName(TaxonomyError):
    pass


class LevelOutOfRange(TaxonomyError):
    pass


class UnknownPath(TaxonomyError):
    """A dotted path does not resolve; carries the deepest valid prefix."""

    def __init__(self, path: str, deepest_valid: str = ""):
        self.path = path
        self.deepest_valid = deepest_valid
        suffix = f" (deepest valid prefix: {deepest_valid!r})" if deepest_valid else ""
        super().__init__(f"unknown taxonomy path {path!r}{suffix}")


class UnmappedLabel(DataError):
    pass


# -- codecs -----------------------------------------------------------------

class OverlappingSpans(DataError):
    pass


class UnknownLabel(DataError):
    pass


class MalformedMarkup(DataError):
    pass


class NestedSpans(DataError):
    pass


class SchemaViolation(DataError):
    pass


class OffsetOutOfRange(DataError):
    pass


# -- ensemble ---------------------------------------------------------------

class MissingRecall(DataError):
    pass


class TokenizationMismatch(DataError):
    pass


# -- knowledge bases --------------------------------------------------------

class EndpointUnavailable(UnerError):
    pass


# -- projection -------------------------------------------------------------

class IndexOutOfRange(DataError):
    pass


class TargetAlreadyAnnotated(DataError):
    pass


# -- evaluation -------------------------------------------------------------

class CorpusMismatch(DataError):
    pass


# -- review -----------------------------------------------------------------

class DuplicateVerdict(DataError):
    pass
