"""Exception hierarchy for the engine."""


class PacerError(Exception):
    """Base class for every error raised by the engine."""


class MalformedStepError(PacerError, ValueError):
    """A TokenStep violates its invariants (empty, positive or unsorted logprobs)."""


class EmptyTraceError(PacerError):
    """A trajectory was requested from a monitor that never saw a step."""


class InsufficientDataError(PacerError):
    """Every sampling attempt failed."""


class InsufficientWarmupError(InsufficientDataError):
    """No completed warmup trace is available to estimate the threshold."""


class NoCandidatesError(PacerError):
    """No trace in the pool carries an extractable answer."""


class ExtractionFailure(PacerError, ValueError):
    """An answer string is empty after canonicalization."""


class UnsupportedBackendError(PacerError):
    """The backend does not report per-token top-k logprobs."""


class BackendError(PacerError):
    """Transport-level failure talking to a model backend."""


class ScriptedMissError(PacerError):
    """A scripted mock received a request it has no script for."""


class StoreFormatError(PacerError):
    """A record store line could not be parsed."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}: line {line_no}: {reason}")


class ReplayMismatchError(PacerError):
    """A replayed request does not match the recorded one."""


class DomainError(PacerError, ValueError):
    """Arguments fall outside the domain where a formula applies."""
