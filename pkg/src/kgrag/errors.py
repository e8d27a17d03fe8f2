"""Exception types shared across the package.

Exit-code mapping used by the CLI: usage errors 1, data errors 2,
provider errors 3.
"""


class KgragError(Exception):
    """Base class for all kgrag errors."""

    exit_code = 2


class UsageError(KgragError):
    """Bad invocation: unknown subcommand, malformed flags."""

    exit_code = 1


class DataError(KgragError):
    """Invalid, malformed, or missing data: files, records, templates."""

    exit_code = 2


class ConfigError(DataError):
    """Bad configuration file or unknown configuration key."""


class TemplateError(DataError):
    """Prompt template is missing a required placeholder."""


class BudgetError(DataError):
    """Prompt cannot be reduced below the configured character budget."""


class EmptyTagError(DataError):
    """A tag normalized to the empty string; callers drop the tag."""


class ProviderError(KgragError):
    """Chat/embedding backend failure: HTTP error, timeout, bad payload."""

    exit_code = 3

    def __init__(self, message: str, *, status: int | None = None, raw: str | None = None):
        super().__init__(message)
        self.status = status
        self.raw = raw


class TaggingError(ProviderError):
    """Tagging output stayed unparseable after the repair retry."""


class ExtractionError(ProviderError):
    """Triple-extraction output stayed unparseable after the repair retry."""
