"""
Exception hierarchy for gluesearch.

Conditions the search contract treats as ordinary answers (absent symbols,
empty intervals, patterns that never occur) are not exceptions.
"""


class GlueSearchError(Exception):
    """Base exception for gluesearch errors."""
    pass


class ConfigError(GlueSearchError):
    """Raised when a configuration value is invalid."""
    pass


class IndexBuildError(GlueSearchError, ValueError):
    """Raised when an index cannot be built from the given text."""
    pass


class PositionError(GlueSearchError, IndexError):
    """Raised when a row or text position is outside the index."""
    pass


class IndexFormatError(GlueSearchError):
    """Raised when an index file is truncated, corrupt or of the wrong version."""
    pass


class LZ77FormatError(GlueSearchError, ValueError):
    """Raised for malformed phrases or phrase dumps."""
    pass


class GrammarError(GlueSearchError, ValueError):
    """Raised for invalid rule ids, split positions or pattern boundaries."""
    pass


class GrammarFormatError(GlueSearchError):
    """Raised when a serialized grammar cannot be decoded."""
    pass


class WildcardPatternError(GlueSearchError, ValueError):
    """Raised for wildcard patterns without any concrete symbol."""
    pass
