"""Consensus-conditioned review, and the voting rules."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .backend.base import GenerationSettings
from .consensus import ConsensusPacket, Tokenizer, rank_key, render_packet, truncate_rationale, vote_weight
from .errors import NoCandidatesError
from .extraction import CanonicalAnswer, extract_answer
from .screening import StablePool, Trace

log = logging.getLogger(__name__)

CWV_REVISED = "cwv_revised"
CWV_ORIGINAL = "cwv_original"
MV = "mv"

REVIEW_INSTRUCTION = (
    "If the peer evidence reveals a flaw in your reasoning, revise; otherwise keep your answer. "
    "End your reply with \\boxed{final answer}."
)

REVIEW_TEMPLATE = """Problem:
{problem}

Your previous solution:
{solution}

Your current answer: {answer}

Peer consensus from other independent solutions:
{packet}

{instruction}"""


@dataclass(frozen=True)
class RevisionOutcome:
    trace_id: str
    original_answer: str
    revised_answer: str
    review_tokens: int
    weight: float
    finish_reason: Optional[str] = None

    @property
    def flipped(self) -> bool:
        return self.original_answer != self.revised_answer


@dataclass(frozen=True)
class VoteResult:
    winner: str
    tally: dict
    counts: dict
    method: str


def build_review_prompt(
    problem: str,
    trace: Trace,
    answer,
    packet: ConsensusPacket,
    trace_tail_budget: int = 1024,
    tokenizer: Optional[Tokenizer] = None,
) -> str:
    if not packet.entries:
        raise ValueError("cannot review against an empty packet")
    return REVIEW_TEMPLATE.format(
        problem=problem.strip(),
        solution=truncate_rationale(trace.text, trace_tail_budget, tokenizer),
        answer=str(answer),
        packet=render_packet(packet),
        instruction=REVIEW_INSTRUCTION,
    )


def _vote(answers: Sequence[str], weights: Sequence[float], method: str) -> VoteResult:
    if len(answers) != len(weights):
        raise ValueError("answers and weights must be aligned")
    if not answers:
        raise NoCandidatesError("nothing to vote on")
    tally: dict[str, float] = {}
    counts: dict[str, int] = {}
    for a, w in zip(answers, weights):
        tally[a] = tally.get(a, 0.0) + w
        counts[a] = counts.get(a, 0) + 1
    winner = min(tally, key=lambda a: rank_key(a, tally[a], counts[a]))
    return VoteResult(winner=winner, tally=tally, counts=counts, method=method)


def _keys(answers) -> list[str]:
    return [a.canonical if isinstance(a, CanonicalAnswer) else str(a) for a in answers]


def cwv(answers, weights: Sequence[float], method: str = CWV_REVISED) -> VoteResult:
    """Confidence-weighted vote. Ties: larger supporter count, then smaller answer."""
    return _vote(_keys(answers), list(weights), method)


def mv(answers) -> VoteResult:
    keys = _keys(answers)
    return _vote(keys, [1.0] * len(keys), MV)


def review(backend, prompt: str, l_rev: int, original, settings: GenerationSettings, request_id: str = ""):
    """One bounded review; returns (revised_answer, tokens, finish_reason).

    The original answer is kept when the reply has no extractable answer or
    the backend fails.
    """
    stream = backend.open_stream(settings.request(prompt, request_id, max_tokens=l_rev))
    return _drain_review(stream, original)


def _drain_review(stream, original):
    for _ in stream:
        pass
    tokens = len(stream.steps)
    if stream.finish_reason == "error":
        log.warning("review %s failed after %d tokens; keeping original answer",
                    stream.request.request_id, tokens)
        return original, tokens, stream.finish_reason
    revised = extract_answer(stream.text)
    if revised is None:
        return original, tokens, stream.finish_reason
    return revised, tokens, stream.finish_reason


def run_phase2(
    pool: StablePool,
    packet: ConsensusPacket,
    backend,
    problem: str,
    settings: GenerationSettings,
    l_rev: int = 1024,
    temperature: float = 1.0,
    raw: bool = False,
    trace_tail_budget: int = 1024,
    parallel: int = 8,
    skip_unanimous: bool = False,
    tokenizer: Optional[Tokenizer] = None,
) -> tuple[VoteResult, list[RevisionOutcome]]:
    """Review every answered pool trace once, then CWV over revised answers.

    Each vote keeps the weight of its original trace; review text never
    changes a weight.
    """
    voters = [(t, a) for t, a in pool.entries if a is not None]
    if not voters:
        raise NoCandidatesError("no pool trace has an extractable answer")
    weights = [vote_weight(t.stability, temperature, raw) for t, _ in voters]

    if skip_unanimous and packet.unanimous:
        results = [(a, 0, None) for _, a in voters]
    else:
        streams = []
        for trace, ans in voters:
            prompt = build_review_prompt(problem, trace, ans, packet, trace_tail_budget, tokenizer)
            req = settings.request(prompt, f"{trace.trace_id}-review", index=trace.index, max_tokens=l_rev)
            streams.append((backend.open_stream(req), ans))
        if parallel <= 1 or len(streams) <= 1:
            results = [_drain_review(s, a) for s, a in streams]
        else:
            with ThreadPoolExecutor(max_workers=min(parallel, len(streams))) as ex:
                results = list(ex.map(lambda sa: _drain_review(*sa), streams))

    outcomes = [
        RevisionOutcome(
            trace_id=trace.trace_id,
            original_answer=orig.canonical,
            revised_answer=rev.canonical,
            review_tokens=tokens,
            weight=w,
            finish_reason=finish,
        )
        for (trace, orig), (rev, tokens, finish), w in zip(voters, results, weights)
    ]
    vote = cwv([o.revised_answer for o in outcomes], weights, CWV_REVISED)
    return vote, outcomes
