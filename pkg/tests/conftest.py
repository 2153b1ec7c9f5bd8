import importlib
from pathlib import Path

import pytest

from pacer import _kernels_py
from pacer.backend.mock import ScriptEntry
from pacer.extraction import canonicalize
from pacer.screening import COMPLETED, WARMUP, StablePool, Threshold, Trace, trace_id_for

FIXTURES = Path(__file__).parent / "fixtures"


def _compiled():
    try:
        return importlib.import_module("pacer._kernels")
    except ImportError:
        return None


COMPILED = _compiled()
KERNEL_IMPLS = [_kernels_py] + ([COMPILED] if COMPILED is not None else [])


@pytest.fixture(params=KERNEL_IMPLS, ids=lambda m: m.IMPLEMENTATION)
def impl(request):
    return request.param


def make_trace(index, stability, answer=None, text="", origin=WARMUP, tokens=10):
    return Trace(
        trace_id=trace_id_for(index),
        index=index,
        origin=origin,
        text=text,
        answer=None if answer is None else canonicalize(answer),
        stability=stability,
        status=COMPLETED,
        generated_tokens=tokens,
        finish_reason="stop",
    )


def make_pool(specs, s=None):
    """specs: (stability, answer, text) triples, indexed in order."""
    traces = [make_trace(i, st, ans, text) for i, (st, ans, text) in enumerate(specs)]
    stabilities = tuple(t.stability for t in traces)
    thr = Threshold(s=min(stabilities) if s is None else s, warmup_stabilities=stabilities)
    return StablePool(entries=tuple((t, t.answer) for t in traces), threshold=thr)


def flat(n_steps, logprob, text="", k=1, **kw):
    """n_steps steps with every top-k logprob equal to ``logprob`` (U_t = -logprob)."""
    return ScriptEntry.constant(n_steps, (logprob,) * k, text, **kw)


def spike(n_before, logprob, spike_logprob, total, text="", k=1):
    """``n_before`` steps at ``logprob``, then steps at ``spike_logprob`` up to ``total``."""
    rows = [(logprob,) * k] * n_before + [(spike_logprob,) * k] * (total - n_before)
    tokens = [""] * total
    if text:
        tokens[-1] = text
    return ScriptEntry(tokens=tokens, logprobs=rows)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
