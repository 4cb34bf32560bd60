"""Exception taxonomy shared across the pipeline.

Exit-code mapping for the CLI lives in cli.py; these classes only carry
enough context to name the failing stage, endpoint, or record.
"""


class MosaigError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(MosaigError):
    """Invalid run configuration (unknown language, preset gating, bad flag)."""


class IncompleteStageError(MosaigError):
    """An upstream pipeline stage has not produced the records we need."""

    def __init__(self, message: str, missing_ids: list[str] | None = None,
                 required_command: str | None = None):
        super().__init__(message)
        self.missing_ids = missing_ids or []
        self.required_command = required_command


class TransportError(MosaigError):
    """Retriable backend transport failure (timeouts, 5xx, connection reset)."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class BackendError(MosaigError):
    """Non-retriable backend failure; carries the endpoint identity."""

    def __init__(self, message: str, endpoint: str | None = None):
        super().__init__(message)
        self.endpoint = endpoint


class ProtocolError(MosaigError):
    """A backend reply violated the wire schema or a declared invariant."""


class AgentProtocolError(MosaigError):
    """The agent conversation broke down (empty reply after retries)."""

    def __init__(self, message: str, role: str | None = None, round_index: int | None = None):
        super().__init__(message)
        self.role = role
        self.round_index = round_index


class SwapInapplicableError(MosaigError):
    """No substitution-lexicon token found in the caption; pair is excluded."""


class ConflictError(MosaigError):
    """A re-put with different content for an existing record key."""


class CorruptionError(MosaigError):
    """Stored bytes do not match the recorded content hash."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.path = path


class NotFoundError(MosaigError):
    """A requested record does not exist (distinguishable from corruption)."""


class UndefinedStatisticError(MosaigError):
    """Degenerate input for kappa / correlation (zero variance, empty table)."""
