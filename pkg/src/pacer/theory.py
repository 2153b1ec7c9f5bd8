"""Closed forms and Monte-Carlo checks for the repair/damage and voting analysis.

All randomness comes from ``numpy.random.SeedSequence(seed)``; trials are
split into fixed-size chunks with spawned child seeds, so results depend
only on (seed, trials) and not on how many workers run the chunks.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import DomainError

CHUNK = 1 << 16

Rate = Union[float, Callable[[float], float]]


def _check_prob(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"{name} must be a probability, got {x}")


def stabilizing_check(p: float, alpha: float, beta: float) -> bool:
    """Repairs dominate damages: (1 - p) * alpha >= p * beta."""
    for name, v in (("p", p), ("alpha", alpha), ("beta", beta)):
        _check_prob(name, v)
    return (1.0 - p) * alpha >= p * beta


def post_review_accuracy(p: float, alpha: float, beta: float) -> float:
    """P(A' correct) = p(1 - beta) + (1 - p) alpha, written as p + [(1-p)alpha - p beta]."""
    for name, v in (("p", p), ("alpha", alpha), ("beta", beta)):
        _check_prob(name, v)
    # this grouping returns p exactly on the stabilizing boundary
    return p + ((1.0 - p) * alpha - p * beta)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class RevisionModel:
    p: float
    alpha: Rate
    beta: Rate
    wrong_answer_arity: int = 3

    def rates(self, margin: Optional[float] = None) -> tuple[float, float]:
        a = self.alpha(margin) if callable(self.alpha) else self.alpha
        b = self.beta(margin) if callable(self.beta) else self.beta
        _check_prob("alpha", a)
        _check_prob("beta", b)
        return a, b


@dataclass(frozen=True)
class RevisionEstimate:
    trials: int
    pre_accuracy: float
    post_accuracy: float
    pre_ci: tuple
    post_ci: tuple
    expected_post: float
    margin: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None


def _chunks(trials: int) -> list[int]:
    sizes = [CHUNK] * (trials // CHUNK)
    if trials % CHUNK:
        sizes.append(trials % CHUNK)
    return sizes


def _map_chunks(fn, sizes: Sequence[int], seed: int, workers: int) -> list:
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    args = list(zip(sizes, seeds))
    if workers <= 1 or len(args) <= 1:
        return [fn(n, ss) for n, ss in args]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda a: fn(*a), args))


def _simulate_point(p: float, alpha: float, beta: float, trials: int, seed: int, workers: int):
    def chunk(n, ss):
        rng = np.random.default_rng(ss)
        correct = rng.random(n) < p
        flip = rng.random(n)
        post = np.where(correct, flip >= beta, flip < alpha)
        return int(correct.sum()), int(post.sum())

    parts = _map_chunks(chunk, _chunks(trials), seed, workers)
    pre = sum(c for c, _ in parts)
    post = sum(q for _, q in parts)
    return pre, post


def simulate_revision(
    model: RevisionModel,
    trials: int,
    seed: int = 0,
    margins: Optional[Iterable[float]] = None,
    workers: int = 1,
) -> Union[RevisionEstimate, list[RevisionEstimate]]:
    """Sample pre-review correctness, then repair/damage events.

    With ``margins`` the rates are evaluated per margin (alpha, beta may be
    functions of the margin) and one estimate per grid point is returned;
    grid point i uses seed ``seed + i``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _check_prob("p", model.p)

    def estimate(margin, point_seed):
        a, b = model.rates(margin)
        pre, post = _simulate_point(model.p, a, b, trials, point_seed, workers)
        return RevisionEstimate(
            trials=trials,
            pre_accuracy=pre / trials,
            post_accuracy=post / trials,
            pre_ci=wilson_interval(pre, trials),
            post_ci=wilson_interval(post, trials),
            expected_post=post_review_accuracy(model.p, a, b),
            margin=margin,
            alpha=a,
            beta=b,
        )

    if margins is None:
        return estimate(None, seed)
    return [estimate(m, seed + i) for i, m in enumerate(margins)]


def step_rate(threshold: float, below: float, above: float) -> Callable[[float], float]:
    """Rate that jumps from ``below`` to ``above`` at ``threshold``."""
    return lambda margin: above if margin >= threshold else below


def logistic_rate(midpoint: float, scale: float, low: float, high: float) -> Callable[[float], float]:
    """Monotone logistic between ``low`` and ``high``; decreasing when high < low."""
    return lambda margin: low + (high - low) / (1.0 + math.exp(-(margin - midpoint) / scale))


def chernoff_bound(pool_size: int, p_prime: float) -> float:
    """exp(-2 B (p' - 1/2)^2), valid for p' > 1/2."""
    if not p_prime > 0.5:
        raise DomainError(f"bound needs p' > 1/2, got {p_prime}")
    if p_prime > 1.0:
        raise DomainError(f"p' must be a probability, got {p_prime}")
    if pool_size < 1:
        raise DomainError("pool size must be >= 1")
    return math.exp(-2.0 * pool_size * (p_prime - 0.5) ** 2)


def chernoff_exponent(pool_size: int, p: float) -> float:
    return 2.0 * pool_size * (p - 0.5) ** 2


@dataclass(frozen=True)
class EnsembleModel:
    pool_size: int
    p_prime: float
    weights: str = "unit"  # or "lognormal"
    lognormal_sigma: float = 0.5
    wrong_answer_arity: int = 3

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        _check_prob("p_prime", self.p_prime)
        if self.weights not in ("unit", "lognormal"):
            raise ValueError(f"unknown weight distribution {self.weights!r}")
        if self.wrong_answer_arity < 1:
            raise ValueError("wrong_answer_arity must be >= 1")


@dataclass(frozen=True)
class VoteErrorEstimate:
    pool_size: int
    p_prime: float
    trials: int
    seed: int
    errors: int

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    @property
    def standard_error(self) -> float:
        e = self.error_rate
        return math.sqrt(e * (1.0 - e) / self.trials)


def sample_votes(model: EnsembleModel, n: int, rng: np.random.Generator):
    """(labels, weights) for ``n`` simulated pools; label 0 is the truth."""
    b = model.pool_size
    correct = rng.random((n, b)) < model.p_prime
    wrong = rng.integers(1, model.wrong_answer_arity + 1, size=(n, b))
    labels = np.where(correct, 0, wrong).astype(np.int64)
    if model.weights == "unit":
        weights = np.ones((n, b), dtype=np.float64)
    else:
        weights = rng.lognormal(0.0, model.lognormal_sigma, size=(n, b))
    return labels, weights


def simulate_vote_error(model: EnsembleModel, trials: int, seed: int = 0, workers: int = 1) -> VoteErrorEstimate:
    """Fraction of simulated pools whose weighted vote misses the truth (ties count as misses)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_labels = model.wrong_answer_arity + 1

    def chunk(n, ss):
        labels, weights = sample_votes(model, n, np.random.default_rng(ss))
        return kernels.weighted_vote_errors(labels, weights, n_labels)

    errors = sum(_map_chunks(chunk, _chunks(trials), seed, workers))
    return VoteErrorEstimate(model.pool_size, model.p_prime, trials, seed, errors)


def voi_exponent_gain(pool_size: int, p: float, delta: float) -> float:
    """Chernoff-exponent gain 2 B delta (2p - 1 + delta) from raising p to p + delta."""
    if p + delta > 1.0:
        raise DomainError(f"p + delta must be <= 1, got {p + delta}")
    if not p + delta > 0.5:
        raise DomainError(f"p + delta must exceed 1/2, got {p + delta}")
    if delta < 0:
        raise DomainError("delta must be non-negative")
    return 2.0 * pool_size * delta * (2.0 * p - 1.0 + delta)


DEFAULT_POOL_SIZES = (1, 5, 11, 33, 101)
DEFAULT_P_PRIMES = (0.55, 0.6, 0.7, 0.9)


def vote_error_sweep(
    pool_sizes: Sequence[int] = DEFAULT_POOL_SIZES,
    p_primes: Sequence[float] = DEFAULT_P_PRIMES,
    trials: int = 100_000,
    seed: int = 0,
    weights: str = "unit",
    wrong_answer_arity: int = 3,
    workers: int = 1,
) -> list[dict]:
    """Rows (B, p_prime, empirical_error, bound, trials, seed); grid point i uses seed + i."""
    rows = []
    i = 0
    for b in pool_sizes:
        for pp in p_primes:
            model = EnsembleModel(b, pp, weights=weights, wrong_answer_arity=wrong_answer_arity)
            est = simulate_vote_error(model, trials, seed + i, workers)
            rows.append({
                "B": b,
                "p_prime": pp,
                "empirical_error": est.error_rate,
                "bound": chernoff_bound(b, pp),
                "trials": trials,
                "seed": seed + i,
            })
            i += 1
    return rows
