"""Token-level uncertainty and prefix stability.

U_t is the mean negative log-probability of the top-k candidates at step t,
Ubar_t its mean over the last W steps (fewer at the start of a trace), and
S_t the negated running maximum of Ubar_t. S_t never increases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import EmptyTraceError, MalformedStepError

DEFAULT_K = 5
DEFAULT_WINDOW = 1024


class TokenStep(NamedTuple):
    """One decoding step: 1-based index, descending top-k logprobs, sampled token text."""

    step_index: int
    topk_logprobs: tuple
    token_text: str = ""


def validate_step(step: TokenStep, k: int | None = None) -> TokenStep:
    """Raise MalformedStepError unless ``step`` satisfies the TokenStep invariants."""
    lps = step.topk_logprobs
    if step.step_index < 1:
        raise MalformedStepError(f"step_index must be >= 1, got {step.step_index}")
    if not lps:
        raise MalformedStepError(f"step {step.step_index}: empty logprob list")
    if k is not None and len(lps) != k:
        raise MalformedStepError(f"step {step.step_index}: expected {k} logprobs, got {len(lps)}")
    prev = math.inf
    for lp in lps:
        if not lp <= 0.0:
            raise MalformedStepError(f"step {step.step_index}: logprob {lp!r} > 0")
        if lp > prev:
            raise MalformedStepError(f"step {step.step_index}: logprobs not sorted descending")
        prev = lp
    return step


def step_uncertainty(step: TokenStep, k: int | None = None) -> float:
    """U_t = -(1/k) * sum of the top-k logprobs. Entries past ``k`` are ignored."""
    lps = step.topk_logprobs
    if not lps:
        raise MalformedStepError(f"step {step.step_index}: empty logprob list")
    return kernels.topk_uncertainty(lps, len(lps) if k is None else k)


# The monitor is the kernel's ring-buffer core; one per stream, single owner.
StabilityMonitor = kernels.StabilityCore


def new_monitor(window: int = DEFAULT_WINDOW, k: int = DEFAULT_K) -> StabilityMonitor:
    return StabilityMonitor(window, k)


def update(monitor: StabilityMonitor, step: TokenStep) -> tuple[float, float]:
    """Advance ``monitor`` by one step; returns (Ubar_t, S_t)."""
    return monitor.update(step)


@dataclass(frozen=True)
class StabilityTrajectory:
    u: list[float]
    ubar: list[float]
    s: list[float]

    @property
    def final_stability(self) -> float:
        return self.s[-1]

    def __len__(self) -> int:
        return len(self.s)


def finalize(monitor: StabilityMonitor) -> StabilityTrajectory:
    if monitor.step_count == 0:
        raise EmptyTraceError("no steps were observed")
    return StabilityTrajectory(list(monitor.u_values), list(monitor.ubar_values), list(monitor.s_values))


def offline_trajectory(
    logprobs: Sequence[Sequence[float]] | np.ndarray, k: int, window: int
) -> StabilityTrajectory:
    """Recompute the whole trajectory from a stored (T, >=k) logprob table in one pass."""
    matrix = np.asarray(logprobs, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise EmptyTraceError("no steps to recompute")
    u = kernels.uncertainty_rows(matrix, k)
    ubar, s = kernels.stability_trajectory(u, window)
    return StabilityTrajectory(u.tolist(), ubar.tolist(), s.tolist())


def trajectory_of_steps(steps: Sequence[TokenStep], k: int, window: int) -> StabilityTrajectory:
    """Offline trajectory for a recorded list of TokenSteps."""
    if not steps:
        raise EmptyTraceError("no steps to recompute")
    return offline_trajectory([s.topk_logprobs[:k] for s in steps], k, window)
