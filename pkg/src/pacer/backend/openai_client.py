"""Streaming client for OpenAI-compatible completion endpoints.

Each server-sent event must carry the sampled token and its top-k
alternatives' logprobs. Both ``/v1/completions`` (``logprobs: k``) and
``/v1/chat/completions`` (``logprobs: true, top_logprobs: k``) chunk shapes
are understood. The API key is read from an environment variable and never
logged.

Logprobs are taken as reported; some servers report them after top-p/top-k
filtering, which changes U_t.
"""
from __future__ import annotations

import json
import logging
import os
from typing import Iterator, Optional

import httpx

from ..errors import BackendError, UnsupportedBackendError
from ..stability import TokenStep
from .base import GenerationRequest, TokenStream

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "PACER_API_KEY"

_FINISH_MAP = {"stop": "stop", "length": "length", "eos": "stop", "abort": "error"}


def _topk_from_values(values, k: int, where: str) -> tuple:
    vals = sorted((float(v) for v in values), reverse=True)
    if len(vals) < k:
        raise UnsupportedBackendError(f"{where}: backend returned {len(vals)} top logprobs, need {k}")
    return tuple(min(v, 0.0) for v in vals[:k])


def parse_completion_chunk(data: dict, k: int) -> tuple[list[tuple[str, tuple]], Optional[str]]:
    """Tokens with top-k rows from a ``/v1/completions`` stream chunk, plus finish reason."""
    choices = data.get("choices") or []
    if not choices:
        return [], None
    choice = choices[0]
    lp = choice.get("logprobs")
    text = choice.get("text") or ""
    out = []
    if lp is None:
        if text:
            raise UnsupportedBackendError("completion chunk carries text but no logprobs")
    else:
        tokens = lp.get("tokens") or []
        tops = lp.get("top_logprobs")
        if tokens and not tops:
            raise UnsupportedBackendError("completion chunk has no top_logprobs")
        for tok, top in zip(tokens, tops or []):
            if not top:
                raise UnsupportedBackendError("missing top_logprobs entry for a token")
            out.append((tok, _topk_from_values(top.values(), k, "completions")))
    return out, choice.get("finish_reason")


def parse_chat_chunk(data: dict, k: int) -> tuple[list[tuple[str, tuple]], Optional[str]]:
    """Tokens with top-k rows from a ``/v1/chat/completions`` stream chunk."""
    choices = data.get("choices") or []
    if not choices:
        return [], None
    choice = choices[0]
    content = (choice.get("delta") or {}).get("content") or ""
    lp = choice.get("logprobs")
    out = []
    items = (lp or {}).get("content") or []
    if content and not items:
        raise UnsupportedBackendError("chat chunk carries content but no logprobs")
    for item in items:
        top = item.get("top_logprobs")
        if not top:
            raise UnsupportedBackendError("missing top_logprobs entry for a token")
        out.append((item.get("token", ""), _topk_from_values([t["logprob"] for t in top], k, "chat")))
    return out, choice.get("finish_reason")


class HTTPTokenStream(TokenStream):
    def __init__(self, request: GenerationRequest, backend: "OpenAICompatibleBackend"):
        super().__init__(request)
        self.backend = backend
        self._response: Optional[httpx.Response] = None

    def _produce(self) -> Iterator[TokenStep]:
        b = self.backend
        parse = parse_chat_chunk if b.api == "chat" else parse_completion_chunk
        k = self.request.top_logprobs
        t = 0
        with b.client.stream("POST", b.url, json=b.payload(self.request), headers=b.headers()) as resp:
            self._response = resp
            if resp.status_code >= 400:
                resp.read()
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            for line in resp.iter_lines():
                if not line or not line.startswith("data:"):
                    continue
                body = line[5:].strip()
                if body == "[DONE]":
                    break
                try:
                    data = json.loads(body)
                except json.JSONDecodeError as exc:
                    raise BackendError(f"bad stream chunk: {exc}") from None
                if "error" in data:
                    raise BackendError(str(data["error"])[:200])
                tokens, finish = parse(data, k)
                for tok, row in tokens:
                    t += 1
                    yield TokenStep(t, row, tok)
                if finish:
                    self._natural_finish = _FINISH_MAP.get(finish, "stop")

    def _close(self) -> None:
        resp = self._response
        if resp is not None:
            try:
                resp.close()
            except Exception:  # closing from another thread may race the reader
                pass


class OpenAICompatibleBackend:
    """Backend for vLLM/SGLang/OpenAI-style servers."""

    tokenizer = None

    def __init__(
        self,
        base_url: str,
        model: str,
        api: str = "completions",
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 600.0,
        client: Optional[httpx.Client] = None,
    ):
        if api not in ("completions", "chat"):
            raise ValueError(f"unknown api {api!r}")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api = api
        self.api_key_env = api_key_env
        self.client = client or httpx.Client(timeout=httpx.Timeout(timeout, connect=30.0))

    @property
    def url(self) -> str:
        path = "/chat/completions" if self.api == "chat" else "/completions"
        return self.base_url + path

    def headers(self) -> dict:
        h = {"Accept": "text/event-stream"}
        key = os.environ.get(self.api_key_env)
        if key:
            h["Authorization"] = f"Bearer {key}"
        return h

    def payload(self, req: GenerationRequest) -> dict:
        p = {
            "model": req.model_name or self.model,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "stream": True,
        }
        if self.api == "chat":
            p["messages"] = [{"role": "user", "content": req.prompt}]
            p["logprobs"] = True
            p["top_logprobs"] = req.top_logprobs
        else:
            p["prompt"] = req.prompt
            p["logprobs"] = req.top_logprobs
        if req.seed is not None:
            p["seed"] = req.seed
        return p

    def open_stream(self, request: GenerationRequest) -> HTTPTokenStream:
        return HTTPTokenStream(request, self)

    def close(self) -> None:
        self.client.close()
