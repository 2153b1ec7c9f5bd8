"""JSONL record store: record live streams, replay them deterministically.

Line 1 is a header ``{"schema_version": 1, ...}``; every further line is one
trace::

    {"trace_id": ..., "request": {...},
     "steps": [{"t": 1, "token": "...", "topk_logprobs": [...]}, ...],
     "finish_reason": "stop"}

Logprobs are rounded to 9 significant digits when recorded. The recording
wrapper hands the rounded values to the engine as well, so a live run and
its replay see identical inputs.
"""
from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Iterator, Optional

from ..errors import ReplayMismatchError, StoreFormatError
from ..stability import TokenStep
from .base import GenerationRequest, TokenStream, TraceRecord

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def quantize(x: float) -> float:
    return float(f"{x:.9g}")


def record_to_dict(rec: TraceRecord) -> dict:
    return {
        "trace_id": rec.trace_id,
        "request": rec.request.to_dict(),
        "steps": [
            {"t": s.step_index, "token": s.token_text, "topk_logprobs": [quantize(x) for x in s.topk_logprobs]}
            for s in rec.steps
        ],
        "finish_reason": rec.finish_reason,
    }


def record_from_dict(d: dict) -> TraceRecord:
    return TraceRecord(
        trace_id=d["trace_id"],
        request=GenerationRequest.from_dict(d["request"]),
        steps=[TokenStep(s["t"], tuple(s["topk_logprobs"]), s["token"]) for s in d["steps"]],
        finish_reason=d["finish_reason"],
    )


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_header(store_path, meta: Optional[dict] = None) -> None:
    header = {"schema_version": SCHEMA_VERSION}
    if meta:
        header["meta"] = meta
    Path(store_path).write_text(_dumps(header) + "\n", encoding="utf-8")


def record(trace_record: TraceRecord, store_path) -> None:
    """Append one record, writing the header first if the store is new."""
    path = Path(store_path)
    if not path.exists() or path.stat().st_size == 0:
        write_header(path)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(_dumps(record_to_dict(trace_record)) + "\n")
        fh.flush()


def read_header(store_path) -> dict:
    path = Path(store_path)
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise StoreFormatError(path, 1, f"bad header: {exc}") from None
    if header.get("schema_version") != SCHEMA_VERSION:
        raise StoreFormatError(path, 1, f"unsupported schema_version {header.get('schema_version')!r}")
    return header


def replay(store_path) -> Iterator[TraceRecord]:
    """Yield records in file order; a malformed line raises StoreFormatError naming it."""
    path = Path(store_path)
    read_header(path)
    with path.open(encoding="utf-8") as fh:
        fh.readline()
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = record_from_dict(d)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise StoreFormatError(path, line_no, str(exc)) from None
            yield rec


class _RecordingStream(TokenStream):
    def __init__(self, inner: TokenStream, sink):
        super().__init__(inner.request)
        self.inner = inner
        self.on_finish(sink)

    def _produce(self):
        for step in self.inner:
            yield TokenStep(step.step_index, tuple(quantize(x) for x in step.topk_logprobs), step.token_text)
        self._natural_finish = self.inner.finish_reason or "stop"
        if self.inner.error is not None:
            self.error = self.inner.error

    def _close(self):
        self.inner.cancel()


class RecordingBackend:
    """Wraps a backend and appends every finished stream to a record store."""

    def __init__(self, inner, store_path, meta: Optional[dict] = None):
        self.inner = inner
        self.store_path = Path(store_path)
        self.tokenizer = getattr(inner, "tokenizer", None)
        self._lock = threading.Lock()
        write_header(self.store_path, meta)

    def _sink(self, stream: TokenStream) -> None:
        rec = TraceRecord(stream.request.request_id, stream.request, list(stream.steps), stream.finish_reason)
        with self._lock:
            record(rec, self.store_path)

    def open_stream(self, request: GenerationRequest) -> TokenStream:
        return _RecordingStream(self.inner.open_stream(request), self._sink)


class _ReplayStream(TokenStream):
    def __init__(self, request: GenerationRequest, rec: TraceRecord):
        super().__init__(request)
        self.rec = rec
        self._natural_finish = rec.finish_reason

    def _produce(self):
        yield from self.rec.steps
        if self.rec.finish_reason == "cancelled":
            raise ReplayMismatchError(
                f"{self.rec.trace_id}: recorded stream was cancelled at step "
                f"{len(self.rec.steps)} but the replayed run did not stop there"
            )
        if self.rec.finish_reason == "error":
            raise ConnectionError(f"{self.rec.trace_id}: recorded transport failure")


class ReplayBackend:
    """Serves recorded streams by request id; prompts must match the recording."""

    tokenizer = None

    def __init__(self, store_path):
        self.store_path = Path(store_path)
        self.header = read_header(self.store_path)
        self.records: dict[str, TraceRecord] = {}
        for rec in replay(self.store_path):
            self.records[rec.trace_id] = rec

    @property
    def meta(self) -> dict:
        return self.header.get("meta", {})

    def open_stream(self, request: GenerationRequest) -> TokenStream:
        rec = self.records.get(request.request_id)
        if rec is None:
            raise ReplayMismatchError(f"no recorded stream for {request.request_id!r}")
        if rec.request.prompt != request.prompt:
            raise ReplayMismatchError(f"{request.request_id}: prompt differs from the recording")
        return _ReplayStream(request, rec)
