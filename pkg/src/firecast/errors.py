"""Exception hierarchy shared across the pipeline.

Everything raised deliberately derives from FirecastError so the CLI can
map failures onto its exit-code contract (usage=1, data=2, internal=3).
"""


class FirecastError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(FirecastError):
    """An argument or in-memory structure violates a documented invariant."""


class FormatError(FirecastError):
    """A file on disk is not a well-formed swath/raster/checkpoint."""


class NotFoundError(FirecastError):
    """A requested store entry, file, or band does not exist."""


class EmptyDataError(FirecastError):
    """An operation received an empty sample set, store, or date range."""
