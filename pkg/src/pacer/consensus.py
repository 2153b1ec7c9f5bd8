"""Weighted answer support, Top-N selection and the consensus packet."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .errors import NoCandidatesError
from .screening import StablePool, Trace

TRUNCATION_MARKER = "[...] "
CHARS_PER_TOKEN = 4

_WORD = re.compile(r"\S+")
_WS = re.compile(r"\s+")


class Tokenizer(Protocol):
    def encode(self, text: str) -> list: ...

    def decode(self, ids: list) -> str: ...


def vote_weight(stability: float, temperature: float = 1.0, raw: bool = False) -> float:
    """exp(S / T): positive and increasing in S. ``raw=True`` returns S itself."""
    if raw:
        return stability
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return math.exp(stability / temperature)


@dataclass(frozen=True)
class CandidateSupport:
    answer: str
    weighted_support: float
    count: int
    representative_trace_id: str


def support(pool: StablePool, temperature: float = 1.0, raw: bool = False) -> dict[str, CandidateSupport]:
    """V(a) for every answer in the pool; answerless traces join no bucket."""
    tallies: dict[str, float] = {}
    counts: dict[str, int] = {}
    for trace, ans in pool.entries:
        if ans is None:
            continue
        key = ans.canonical
        tallies[key] = tallies.get(key, 0.0) + vote_weight(trace.stability, temperature, raw)
        counts[key] = counts.get(key, 0) + 1
    if not tallies:
        raise NoCandidatesError("no pool trace has an extractable answer")
    return {
        a: CandidateSupport(a, tallies[a], counts[a], representative(pool, a).trace_id)
        for a in tallies
    }


def rank_key(answer: str, tally: float, count: int):
    """Sort key: larger tally, then larger count, then lexicographically smaller answer."""
    return (-tally, -count, answer)


def top_n(support_map: dict[str, CandidateSupport], n: int) -> list[CandidateSupport]:
    if n < 1:
        raise ValueError("n must be >= 1")
    ranked = sorted(support_map.values(), key=lambda c: rank_key(c.answer, c.weighted_support, c.count))
    return ranked[:n]


def representative(pool: StablePool, answer: str) -> Trace:
    """Highest-stability supporter of ``answer``; ties go to the earliest trace."""
    best: Optional[Trace] = None
    for trace, ans in pool.entries:
        if ans is None or ans.canonical != answer:
            continue
        if best is None or (trace.stability, -trace.index) > (best.stability, -best.index):
            best = trace
    if best is None:
        raise AssertionError(f"no pool trace supports answer {answer!r}")
    return best


def count_tokens(text: str, tokenizer: Optional[Tokenizer] = None) -> int:
    if tokenizer is not None:
        return len(tokenizer.encode(text))
    return len(_WORD.findall(text))


def truncate_rationale(text: str, l_sum: int, tokenizer: Optional[Tokenizer] = None) -> str:
    """Keep the last ``l_sum`` tokens, prefixed with a marker when anything was cut.

    Without a tokenizer, tokens are whitespace-delimited words and the kept
    tail is also capped at 4 * l_sum characters.
    """
    if l_sum < 1:
        raise ValueError("l_sum must be >= 1")
    if tokenizer is not None:
        ids = tokenizer.encode(text)
        if len(ids) <= l_sum:
            return text
        return TRUNCATION_MARKER + tokenizer.decode(ids[-l_sum:])
    cap = CHARS_PER_TOKEN * l_sum
    words = list(_WORD.finditer(text))
    if len(words) <= l_sum and len(text) <= cap:
        return text
    tail = text[words[-l_sum].start():] if len(words) > l_sum else text
    if len(tail) > cap:
        cut = len(tail) - cap
        # skip a leading word fragment, unless nothing whole would remain
        gap = _WS.search(tail, cut)
        if not tail[cut - 1].isspace() and gap is not None and gap.end() < len(tail):
            cut = gap.end()
        tail = tail[cut:]
    return TRUNCATION_MARKER + tail


@dataclass(frozen=True)
class PacketEntry:
    answer: str
    weighted_support: float
    support_share: float
    rationale: str
    representative_trace_id: str = ""


@dataclass(frozen=True)
class ConsensusPacket:
    entries: tuple
    n_top: int
    sum_budget: int

    @property
    def unanimous(self) -> bool:
        return len(self.entries) == 1 and self.entries[0].support_share >= 1.0


def build_packet(
    pool: StablePool,
    n: int = 4,
    l_sum: int = 512,
    temperature: float = 1.0,
    raw: bool = False,
    tokenizer: Optional[Tokenizer] = None,
) -> ConsensusPacket:
    """Top-N answers with their share of pool weight and a truncated representative rationale."""
    sup = support(pool, temperature, raw)
    total = sum(vote_weight(t.stability, temperature, raw) for t, _ in pool.entries)
    entries = []
    for cand in top_n(sup, n):
        if total != 0:
            share = cand.weighted_support / total
        else:  # raw weights with every S = 0
            share = cand.count / pool.size
        rep = representative(pool, cand.answer)
        entries.append(
            PacketEntry(
                answer=cand.answer,
                weighted_support=cand.weighted_support,
                support_share=share,
                rationale=truncate_rationale(rep.text, l_sum, tokenizer),
                representative_trace_id=rep.trace_id,
            )
        )
    return ConsensusPacket(entries=tuple(entries), n_top=n, sum_budget=l_sum)


def render_packet(packet: ConsensusPacket) -> str:
    """One line per candidate, best first. Whitespace runs in rationales become single spaces."""
    lines = []
    for i, e in enumerate(packet.entries, start=1):
        pct = round(e.support_share * 100)
        rationale = _WS.sub(" ", e.rationale).strip()
        lines.append(f"Candidate {i}: answer={e.answer}; support={pct}%; representative reasoning: {rationale}")
    return "\n".join(lines)


def margin(tallies: dict[str, float], counts: Optional[dict[str, int]] = None) -> Optional[float]:
    """V(leader) - max over the others; None when only one answer has support."""
    if len(tallies) < 2:
        return None
    counts = counts or {}
    ranked = sorted(tallies, key=lambda a: rank_key(a, tallies[a], counts.get(a, 0)))
    leader = ranked[0]
    return tallies[leader] - max(v for a, v in tallies.items() if a != leader)


def pool_weights(traces: Sequence[Trace], temperature: float = 1.0, raw: bool = False) -> list[float]:
    return [vote_weight(t.stability, temperature, raw) for t in traces]
