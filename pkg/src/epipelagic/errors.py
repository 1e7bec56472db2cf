"""Shared error types: caps are contracts, never silent truncation."""


class EnumerationCapError(ValueError):
    """An exhaustive computation would exceed its configured work cap."""


class PrecisionError(ValueError):
    """A congruence or value was requested beyond the certified precision cap."""
