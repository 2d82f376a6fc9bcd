"""Exception hierarchy.

Everything raised deliberately by the library derives from ArchscopeError so
the CLI can map it to the usage/domain exit code; anything else escaping is an
internal error.
"""


class ArchscopeError(Exception):
    """Base class for all deliberate library errors."""


class ConfigError(ArchscopeError):
    """A config document (space, profile, rule set, table) violates its schema."""


class ValidationError(ArchscopeError):
    """An architecture, placement or argument is invalid for the given space."""


class CoverageError(ArchscopeError):
    """A metric table does not cover the requested space or architecture."""


class EvaluationError(ArchscopeError):
    """A metric evaluator failed; carries the offending architecture record."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
