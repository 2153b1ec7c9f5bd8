"""End-to-end run: screening, consensus packet, one review round, voting."""
from __future__ import annotations

import logging
from typing import Optional

from .config import GENERATION_TEMPLATE, PacerConfig
from .consensus import build_packet, margin, vote_weight
from .report import RunReport, TokenLedger
from .revision import CWV_ORIGINAL, VoteResult, cwv, mv, run_phase2
from .screening import COMPLETED, Phase1Result, run_phase1

log = logging.getLogger(__name__)


def generation_prompt(problem: str) -> str:
    return GENERATION_TEMPLATE.format(problem=problem.strip())


def _method(v: VoteResult) -> dict:
    return {"answer": v.winner, "tally": dict(v.tally), "counts": dict(v.counts)}


def _trace_rows(phase1: Phase1Result) -> list[dict]:
    in_pool = {t.trace_id for t in phase1.pool.traces}
    return [
        {
            "trace_id": t.trace_id,
            "origin": t.origin,
            "status": t.status,
            "stability": t.stability,
            "answer": None if t.answer is None else t.answer.canonical,
            "generated_tokens": t.generated_tokens,
            "finish_reason": t.finish_reason,
            "in_pool": t.trace_id in in_pool,
        }
        for t in phase1.traces
    ]


def _fallback_answer(phase1: Phase1Result) -> Optional[str]:
    """Answer of the most stable completed warmup trace that has one."""
    cands = [t for t in phase1.warmup if t.status == COMPLETED and t.answer is not None]
    if not cands:
        return None
    best = max(cands, key=lambda t: (t.stability, -t.index))
    return best.answer.canonical


def run(config: PacerConfig, problem: str, backend, problem_id: str = "problem") -> RunReport:
    settings = config.generation()
    prompt = generation_prompt(problem)
    phase1 = run_phase1(config.screening(), backend, prompt, settings)
    pool = phase1.pool
    temp, raw = config.vote_temperature, config.raw_weights

    voters = [(t, a) for t, a in pool.entries if a is not None]
    if not voters:
        answer = _fallback_answer(phase1)
        log.warning("empty pool or no answers (B=%d); falling back to best warmup answer %r", pool.size, answer)
        fb = {"answer": answer, "tally": {}, "counts": {}}
        return RunReport(
            problem_id=problem_id,
            n_try=config.n_try,
            final_answer=answer,
            methods={"pacer": fb, "online": dict(fb), "mv": dict(fb)},
            ledger=TokenLedger(phase1.warmup_tokens, phase1.online_attempt_tokens, 0, 0),
            pool_size=pool.size,
            threshold=phase1.threshold.s,
            margin=None,
            fallback=True,
            traces=_trace_rows(phase1),
        )

    weights = [vote_weight(t.stability, temp, raw) for t, _ in voters]
    online = cwv([a for _, a in voters], weights, CWV_ORIGINAL)
    majority = mv([a for _, a in voters])

    packet = build_packet(pool, config.n_top, config.l_sum, temp, raw, getattr(backend, "tokenizer", None))
    pacer, outcomes = run_phase2(
        pool, packet, backend, problem, settings,
        l_rev=config.l_rev, temperature=temp, raw=raw,
        trace_tail_budget=config.trace_tail_budget, parallel=config.parallel,
        skip_unanimous=config.skip_unanimous, tokenizer=getattr(backend, "tokenizer", None),
    )

    ledger = TokenLedger(
        warmup_tokens=phase1.warmup_tokens,
        online_attempt_tokens=phase1.online_attempt_tokens,
        review_tokens=sum(o.review_tokens for o in outcomes),
        packet_tokens=0,
    )
    return RunReport(
        problem_id=problem_id,
        n_try=config.n_try,
        final_answer=pacer.winner,
        methods={"pacer": _method(pacer), "online": _method(online), "mv": _method(majority)},
        ledger=ledger,
        pool_size=pool.size,
        threshold=phase1.threshold.s,
        margin=margin(online.tally, online.counts),
        flips=[
            {
                "trace_id": o.trace_id,
                "original_answer": o.original_answer,
                "revised_answer": o.revised_answer,
                "flipped": o.flipped,
                "review_tokens": o.review_tokens,
                "weight": o.weight,
            }
            for o in outcomes
        ],
        traces=_trace_rows(phase1),
    )

