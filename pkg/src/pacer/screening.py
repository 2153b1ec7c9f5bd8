"""Warmup threshold, online early stopping and stable-pool construction."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .backend.base import GenerationSettings, TokenStream
from .errors import InsufficientDataError, InsufficientWarmupError
from .extraction import CanonicalAnswer, extract_answer
from .stability import StabilityMonitor, StabilityTrajectory, finalize

log = logging.getLogger(__name__)

WARMUP = "warmup"
ONLINE = "online"

COMPLETED = "completed"
EARLY_STOPPED = "early_stopped"
FAILED = "failed"


@dataclass(frozen=True)
class ScreeningConfig:
    n_try: int = 256
    n_init: int = 64
    eta: float = 10.0
    k: int = 5
    window: int = 1024
    parallel: int = 8

    def __post_init__(self):
        if self.n_init < 1 or self.n_try < 1:
            raise ValueError("n_try and n_init must be positive")
        if self.n_init > self.n_try:
            raise ValueError(f"n_init ({self.n_init}) exceeds n_try ({self.n_try})")
        if not 0 < self.eta < 100:
            raise ValueError(f"eta must lie in (0, 100), got {self.eta}")
        if self.parallel < 1:
            raise ValueError("parallel must be >= 1")


@dataclass(frozen=True)
class Threshold:
    s: float
    warmup_stabilities: tuple


@dataclass
class Trace:
    trace_id: str
    index: int
    origin: str
    text: str = ""
    answer: Optional[CanonicalAnswer] = None
    stability: Optional[float] = None
    status: str = COMPLETED
    generated_tokens: int = 0
    finish_reason: Optional[str] = None
    trajectory: Optional[StabilityTrajectory] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class StablePool:
    entries: tuple  # (Trace, Optional[CanonicalAnswer]) pairs, warmup first then survivors
    threshold: Threshold

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def traces(self) -> list[Trace]:
        return [t for t, _ in self.entries]


def trace_id_for(index: int) -> str:
    return f"t{index:04d}"


def threshold_rank(n: int, eta: float) -> int:
    """1-based nearest-rank position of the (100 - eta)th percentile among n values."""
    q = (Fraction(100) - Fraction(eta)) / 100
    return max(1, math.ceil(q * n))


def estimate_threshold(warmup_stabilities: Sequence[float], eta: float) -> Threshold:
    """Nearest-rank (100 - eta)th percentile: an observed stability, never interpolated."""
    values = list(warmup_stabilities)
    if not values:
        raise InsufficientWarmupError("no completed warmup traces to set the threshold")
    if not 0 < eta < 100:
        raise ValueError(f"eta must lie in (0, 100), got {eta}")
    ordered = sorted(values)
    s = ordered[threshold_rank(len(ordered), eta) - 1]
    return Threshold(s=s, warmup_stabilities=tuple(values))


def should_stop(current_stability: float, threshold: Threshold) -> bool:
    return current_stability < threshold.s


def build_pool(warmup: Sequence[Trace], survivors: Sequence[Trace], threshold: Threshold) -> StablePool:
    """Warmup traces with S >= s, then every online survivor (already screened online)."""
    kept = [t for t in warmup if t.status == COMPLETED and t.stability >= threshold.s]
    kept += [t for t in survivors if t.status == COMPLETED]
    return StablePool(entries=tuple((t, t.answer) for t in kept), threshold=threshold)


def consume(
    stream: TokenStream,
    trace: Trace,
    k: int,
    window: int,
    threshold: Optional[Threshold] = None,
) -> Trace:
    """Drain ``stream`` into ``trace`` while tracking stability.

    With a threshold the stream is cancelled at the first step whose S_t
    falls below it. Every delivered step is counted, including the
    discarded prefix of a stopped attempt.
    """
    monitor = StabilityMonitor(window, k)
    stopped = False
    for step in stream:
        _, s_t = monitor.update(step)
        if threshold is not None and s_t < threshold.s:
            stream.cancel()
            stopped = True
            break
    trace.generated_tokens = len(stream.steps)
    trace.finish_reason = stream.finish_reason
    if stopped:
        trace.status = EARLY_STOPPED
        trace.stability = monitor.current_stability
        return trace
    if stream.finish_reason in ("stop", "length") and monitor.step_count > 0:
        trace.status = COMPLETED
        trace.trajectory = finalize(monitor)
        trace.stability = trace.trajectory.final_stability
        trace.text = stream.text
        trace.answer = extract_answer(trace.text)
    else:
        trace.status = FAILED
        if monitor.step_count > 0:
            trace.stability = monitor.current_stability
    return trace


@dataclass
class Phase1Result:
    pool: StablePool
    threshold: Threshold
    traces: list[Trace]
    warmup_tokens: int
    online_attempt_tokens: int

    @property
    def warmup(self) -> list[Trace]:
        return [t for t in self.traces if t.origin == WARMUP]

    @property
    def online(self) -> list[Trace]:
        return [t for t in self.traces if t.origin == ONLINE]


def _run_batch(jobs: list[Callable[[], Trace]], parallel: int) -> list[Trace]:
    if parallel <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=min(parallel, len(jobs))) as pool:
        return list(pool.map(lambda job: job(), jobs))


def run_phase1(config: ScreeningConfig, backend, prompt: str, settings: GenerationSettings) -> Phase1Result:
    """Warmup to completion, set the threshold, then screen the remaining attempts online.

    Streams are opened in attempt order on the calling thread (so scripted
    and replayed backends see a deterministic request sequence) and drained
    with at most ``config.parallel`` workers. Warmup is a barrier: no online
    attempt starts before the threshold exists.
    """
    def job(stream, trace, threshold=None):
        return lambda: consume(stream, trace, config.k, config.window, threshold)

    warm_jobs = []
    for i in range(config.n_init):
        trace = Trace(trace_id_for(i), i, WARMUP)
        stream = backend.open_stream(settings.request(prompt, trace.trace_id, index=i))
        warm_jobs.append(job(stream, trace))
    warmup = _run_batch(warm_jobs, config.parallel)

    done = [t for t in warmup if t.status == COMPLETED]
    if not done:
        raise InsufficientWarmupError(f"all {len(warmup)} warmup attempts failed")
    threshold = estimate_threshold([t.stability for t in done], config.eta)
    log.info("threshold s=%.6g from %d warmup traces", threshold.s, len(done))

    online_jobs = []
    for i in range(config.n_init, config.n_try):
        trace = Trace(trace_id_for(i), i, ONLINE)
        stream = backend.open_stream(settings.request(prompt, trace.trace_id, index=i))
        online_jobs.append(job(stream, trace, threshold))
    online = _run_batch(online_jobs, config.parallel)

    traces = warmup + online
    if all(t.status == FAILED for t in traces):
        raise InsufficientDataError("every sampling attempt failed")
    survivors = [t for t in online if t.status == COMPLETED]
    pool = build_pool(warmup, survivors, threshold)
    log.info("pool B=%d (%d survivors, %d stopped)", pool.size, len(survivors),
             sum(t.status == EARLY_STOPPED for t in online))
    return Phase1Result(
        pool=pool,
        threshold=threshold,
        traces=traces,
        warmup_tokens=sum(t.generated_tokens for t in warmup),
        online_attempt_tokens=sum(t.generated_tokens for t in online),
    )
