"""Request/record types and the cancellable token stream shared by all backends."""
from __future__ import annotations

import hashlib
import logging
import threading
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Optional, Protocol

from ..errors import ReplayMismatchError, UnsupportedBackendError
from ..stability import TokenStep

log = logging.getLogger(__name__)

FINISH_REASONS = ("length", "stop", "cancelled", "error")
# errors that mean the run itself is invalid, not just one attempt
FATAL_ERRORS = (UnsupportedBackendError, ReplayMismatchError)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int
    top_logprobs: int
    temperature: float = 0.6
    top_p: float = 0.95
    stream: bool = True
    model_name: str = ""
    request_id: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.top_logprobs < 1:
            raise ValueError("top_logprobs must be >= 1")

    @property
    def prompt_hash(self) -> str:
        return prompt_hash(self.prompt)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationRequest":
        return cls(**d)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationSettings:
    """Per-run sampling parameters; builds one GenerationRequest per attempt."""

    model_name: str = ""
    max_tokens: int = 16384
    temperature: float = 0.6
    top_p: float = 0.95
    top_logprobs: int = 5
    seed: Optional[int] = None

    def request(self, prompt: str, request_id: str, index: int = 0, max_tokens: Optional[int] = None):
        return GenerationRequest(
            prompt=prompt,
            max_tokens=max_tokens or self.max_tokens,
            top_logprobs=self.top_logprobs,
            temperature=self.temperature,
            top_p=self.top_p,
            model_name=self.model_name,
            request_id=request_id,
            seed=None if self.seed is None else self.seed + index,
        )


@dataclass
class TraceRecord:
    trace_id: str
    request: GenerationRequest
    steps: list[TokenStep] = field(default_factory=list)
    finish_reason: str = "stop"

    @property
    def full_text(self) -> str:
        return "".join(s.token_text for s in self.steps)


class Backend(Protocol):
    tokenizer: object

    def open_stream(self, request: GenerationRequest) -> "TokenStream": ...


class TokenStream:
    """Iterator of TokenSteps that can be cancelled from any thread.

    Subclasses implement ``_produce`` (a generator of steps) and optionally
    ``_close`` to release transport resources. ``steps`` holds everything
    delivered to the consumer; ``finish_reason`` is set exactly once.
    Transport failures end the stream with ``finish_reason='error'`` and keep
    the steps delivered so far.
    """

    def __init__(self, request: GenerationRequest):
        self.request = request
        self.steps: list[TokenStep] = []
        self.finish_reason: Optional[str] = None
        self.error: Optional[BaseException] = None
        self._natural_finish = "stop"
        self._lock = threading.Lock()
        self._started = False
        self._callbacks: list[Callable[["TokenStream"], None]] = []

    def _produce(self) -> Iterator[TokenStep]:
        raise NotImplementedError

    def _close(self) -> None:
        pass

    def on_finish(self, fn: Callable[["TokenStream"], None]) -> None:
        self._callbacks.append(fn)

    @property
    def text(self) -> str:
        return "".join(s.token_text for s in self.steps)

    def cancel(self) -> None:
        """Stop the stream after the step already delivered. Idempotent."""
        self._finish("cancelled")

    def _finish(self, reason: str) -> None:
        with self._lock:
            if self.finish_reason is not None:
                return
            self.finish_reason = reason
        try:
            self._close()
        finally:
            for fn in self._callbacks:
                fn(self)

    def __iter__(self) -> Iterator[TokenStep]:
        with self._lock:
            if self._started:
                raise RuntimeError("a TokenStream can only be consumed once")
            self._started = True
        gen = self._produce()
        try:
            while self.finish_reason is None:
                try:
                    step = next(gen)
                except StopIteration:
                    self._finish(self._natural_finish)
                    return
                except FATAL_ERRORS:
                    self._finish("error")
                    raise
                except Exception as exc:
                    if self.finish_reason is None:
                        log.warning("stream %s failed after %d steps: %s",
                                    self.request.request_id, len(self.steps), exc)
                        self.error = exc
                        self._finish("error")
                    return
                if self.finish_reason is not None:
                    return
                if len(self.steps) >= self.request.max_tokens:
                    self._finish("length")
                    return
                self.steps.append(step)
                yield step
        finally:
            gen.close()
            if self.finish_reason is None:
                # consumer walked away without cancelling
                self._finish("cancelled")
