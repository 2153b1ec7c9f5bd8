"""Deterministic scripted backend for tests and desk-scale runs."""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..errors import BackendError, ScriptedMissError
from ..stability import TokenStep
from .base import GenerationRequest, TokenStream, prompt_hash


@dataclass
class ScriptEntry:
    """One scripted completion: token texts with their top-k logprob rows.

    ``fail_after`` makes the stream raise a transport error after that many
    steps have been delivered.
    """

    tokens: list[str]
    logprobs: list[Sequence[float]]
    finish_reason: str = "stop"
    fail_after: Optional[int] = None

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("tokens and logprobs must have equal length")

    @classmethod
    def constant(cls, n_steps: int, logprob_row: Sequence[float], text: str = "", **kw) -> "ScriptEntry":
        """``n_steps`` steps sharing one logprob row; ``text`` is spread over the first steps.

        The text is split on whitespace boundaries (keeping the whitespace) so
        the concatenated tokens reproduce it; remaining steps emit "".
        """
        pieces = _split_keep_ws(text)
        if len(pieces) > n_steps:
            pieces = pieces[: n_steps - 1] + ["".join(pieces[n_steps - 1 :])]
        tokens = pieces + [""] * (n_steps - len(pieces))
        return cls(tokens=tokens, logprobs=[tuple(logprob_row)] * n_steps, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptEntry":
        return cls(
            tokens=list(d["tokens"]),
            logprobs=[tuple(r) for r in d["logprobs"]],
            finish_reason=d.get("finish_reason", "stop"),
            fail_after=d.get("fail_after"),
        )


def _split_keep_ws(text: str) -> list[str]:
    out: list[str] = []
    cur = ""
    for ch in text:
        cur += ch
        if ch.isspace():
            out.append(cur)
            cur = ""
    if cur:
        out.append(cur)
    return out


def uniform_row(p: float, k: int) -> tuple:
    """A top-k row where every candidate has probability ``p``: U_t = -ln p."""
    return (math.log(p),) * k


class ScriptedStream(TokenStream):
    def __init__(self, request: GenerationRequest, entry: ScriptEntry):
        super().__init__(request)
        self.entry = entry
        self._natural_finish = entry.finish_reason

    def _produce(self):
        e = self.entry
        for i, (tok, row) in enumerate(zip(e.tokens, e.logprobs)):
            if e.fail_after is not None and i >= e.fail_after:
                raise BackendError("scripted connection loss")
            yield TokenStep(i + 1, tuple(row), tok)
        if e.fail_after is not None and e.fail_after <= len(e.tokens):
            raise BackendError("scripted connection loss")


class ScriptedBackend:
    """Serves ScriptEntries in arrival order, or per prompt hash.

    With ``match='prompt_hash'`` the script maps sha256(prompt) to a list of
    entries consumed in order, so repeated samples of one prompt work.
    Any request without a script raises ScriptedMissError.
    """

    tokenizer = None

    def __init__(self, script, match: str = "ordered"):
        if match not in ("ordered", "prompt_hash"):
            raise ValueError(f"unknown match mode {match!r}")
        self.match = match
        self._lock = threading.Lock()
        self.requests: list[GenerationRequest] = []
        if match == "ordered":
            self._queue = list(script)
        else:
            self._by_hash = {h: list(v) for h, v in dict(script).items()}

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        """Load ``{"match": ..., "entries": [...]}`` or ``{"match": "prompt_hash", "entries": {hash: [...]}}``."""
        data = json.loads(Path(path).read_text())
        match = data.get("match", "ordered")
        if match == "ordered":
            script = [ScriptEntry.from_dict(d) for d in data["entries"]]
        else:
            script = {h: [ScriptEntry.from_dict(d) for d in v] for h, v in data["entries"].items()}
        return cls(script, match=match)

    @property
    def remaining(self) -> int:
        if self.match == "ordered":
            return len(self._queue)
        return sum(len(v) for v in self._by_hash.values())

    def open_stream(self, request: GenerationRequest) -> ScriptedStream:
        with self._lock:
            self.requests.append(request)
            if self.match == "ordered":
                if not self._queue:
                    raise ScriptedMissError(f"no script left for request {request.request_id!r}")
                entry = self._queue.pop(0)
            else:
                key = prompt_hash(request.prompt)
                bucket = self._by_hash.get(key)
                if not bucket:
                    raise ScriptedMissError(f"no script for prompt hash {key[:12]}")
                entry = bucket.pop(0)
        return ScriptedStream(request, entry)


def scripted_mock(script, match: str = "ordered") -> ScriptedBackend:
    return ScriptedBackend(script, match=match)
