"""Model backends: HTTP streaming client, scripted mock, record/replay store."""
from .base import (
    Backend,
    GenerationRequest,
    GenerationSettings,
    TokenStream,
    TraceRecord,
    prompt_hash,
)
from .mock import ScriptEntry, ScriptedBackend, scripted_mock, uniform_row
from .openai_client import OpenAICompatibleBackend
from .store import RecordingBackend, ReplayBackend, record, replay

__all__ = [
    "Backend",
    "GenerationRequest",
    "GenerationSettings",
    "OpenAICompatibleBackend",
    "RecordingBackend",
    "ReplayBackend",
    "ScriptEntry",
    "ScriptedBackend",
    "TokenStream",
    "TraceRecord",
    "prompt_hash",
    "record",
    "replay",
    "scripted_mock",
    "uniform_row",
]
