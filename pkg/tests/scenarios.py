"""Scripted end-to-end sessions stored as JSON fixtures."""
import json
import math
import threading

from pacer.backend import ScriptedBackend
from pacer.config import PacerConfig

from conftest import FIXTURES, flat, spike


def _entry(spec, k):
    if "spike_at" in spec:
        return spike(spec["spike_at"] - 1, spec["logprob"], spec["spike_logprob"], spec["steps"], spec.get("text", ""), k=k)
    return flat(spec["steps"], spec["logprob"], spec.get("text", ""), k=k)


def load(name):
    """(config, script entries in request order, raw fixture dict)."""
    data = json.loads((FIXTURES / f"{name}.json").read_text(encoding="utf-8"))
    cfg = PacerConfig.from_dict(data["config"])
    entries = [_entry(s, cfg.k) for s in data["attempts"] + data["reviews"]]
    return cfg, entries, data


def backend(name):
    cfg, entries, data = load(name)
    return cfg, ScriptedBackend(entries), data


def script_json(entries):
    """The ``--mock`` file format for a list of ScriptEntries."""
    return {
        "match": "ordered",
        "entries": [
            {"tokens": e.tokens, "logprobs": [list(r) for r in e.logprobs], "finish_reason": e.finish_reason}
            for e in entries
        ],
    }


def exp_sum(stabilities):
    """Left-to-right sum of exp(S), the order the engine visits pool traces in."""
    total = 0.0
    for s in stabilities:
        total += math.exp(s)
    return total


class CountingBackend:
    """Wraps a backend and counts every step any stream delivers."""

    def __init__(self, inner):
        self.inner = inner
        self.delivered = 0
        self._lock = threading.Lock()
        self.tokenizer = getattr(inner, "tokenizer", None)

    def _count(self, stream):
        with self._lock:
            self.delivered += len(stream.steps)

    def open_stream(self, request):
        stream = self.inner.open_stream(request)
        stream.on_finish(self._count)
        return stream
