"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class DirError(Exception):
    """Base class for every error raised by this package."""


class ColumnNameError(DirError):
    """A column name is empty or unusable after normalization."""


class SchemaError(DirError):
    """A declared or required column is missing from a table schema."""


class IntegrityError(DirError):
    """Primary-key uniqueness or key-set alignment is violated.

    ``keys`` holds the offending primary-key values.
    """

    def __init__(self, message: str, keys: list[str] | None = None):
        super().__init__(message)
        self.keys = keys or []


class BudgetError(DirError):
    """A rendered prompt exceeds the configured token budget."""

    def __init__(self, estimated: int, limit: int, hint: str = ""):
        detail = f"prompt estimated at {estimated} tokens exceeds limit of {limit}"
        if hint:
            detail = f"{detail} ({hint})"
        super().__init__(detail)
        self.estimated = estimated
        self.limit = limit


class ProviderError(DirError):
    """The completion provider failed after all retries."""


class ExtractionParseError(DirError):
    """An LLM completion contained no parseable key-value array."""


class GroundingError(DirError):
    """A mandatory grounding key is absent from a catalog."""


class StoreLimitError(DirError):
    """The backing store cannot hold the requested number of columns."""

    def __init__(self, requested: int, limit: int):
        super().__init__(f"table needs {requested} columns but the store allows {limit}")
        self.requested = requested
        self.limit = limit


class ParseError(DirError):
    """SQL text falls outside the supported subset grammar."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SemanticParseError(DirError):
    """No usable SQL could be extracted from the LLM completion."""

    def __init__(self, message: str, completion: str = ""):
        super().__init__(message)
        self.completion = completion


class ContractError(DirError):
    """An operation was invoked outside its stated contract."""


class RoutingError(DirError):
    """No registered table matches the question at all."""


class AgentBudgetError(DirError):
    """The agent exceeded its per-utterance tool-call budget."""

    def __init__(self, message: str, partial_trace: list | None = None):
        super().__init__(message)
        self.partial_trace = partial_trace or []


class SpecError(DirError):
    """A corpus or suite specification is unsatisfiable."""


class ConfigError(DirError):
    """A configuration file is missing or malformed."""
