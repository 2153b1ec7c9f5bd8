"""Token ledger and run report."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

REPORT_VERSION = 1


@dataclass(frozen=True)
class TokenLedger:
    warmup_tokens: int = 0
    online_attempt_tokens: int = 0
    review_tokens: int = 0
    # packets are built by truncation, so the model never generates them
    packet_tokens: int = 0

    @property
    def total(self) -> int:
        return self.warmup_tokens + self.online_attempt_tokens + self.review_tokens + self.packet_tokens

    @property
    def screening_total(self) -> int:
        """Tokens spent before revision (what the baselines cost)."""
        return self.warmup_tokens + self.online_attempt_tokens

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TokenLedger":
        return cls(d["warmup_tokens"], d["online_attempt_tokens"], d["review_tokens"], d["packet_tokens"])


@dataclass
class RunReport:
    problem_id: str
    n_try: int
    final_answer: Optional[str]
    methods: dict  # name -> {"answer", "tally", "counts"}
    ledger: TokenLedger
    pool_size: int
    threshold: Optional[float]
    margin: Optional[float]
    fallback: bool = False
    flips: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "problem_id": self.problem_id,
            "n_try": self.n_try,
            "final_answer": self.final_answer,
            "methods": self.methods,
            "ledger": self.ledger.to_dict(),
            "pool_size": self.pool_size,
            "threshold": self.threshold,
            "margin": self.margin,
            "fallback": self.fallback,
            "flips": self.flips,
            "traces": self.traces,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("report_version") != REPORT_VERSION:
            raise ValueError(f"unsupported report_version {d.get('report_version')!r}")
        return cls(
            problem_id=d["problem_id"],
            n_try=d["n_try"],
            final_answer=d["final_answer"],
            methods=d["methods"],
            ledger=TokenLedger.from_dict(d["ledger"]),
            pool_size=d["pool_size"],
            threshold=d["threshold"],
            margin=d["margin"],
            fallback=d.get("fallback", False),
            flips=d.get("flips", []),
            traces=d.get("traces", []),
        )

    def to_text(self) -> str:
        lg = self.ledger
        lines = [
            f"problem: {self.problem_id}",
            f"final answer (pacer): {self.final_answer}",
        ]
        for name in ("pacer", "online", "mv"):
            m = self.methods.get(name)
            if m:
                lines.append(f"  {name:<7} {m['answer']}")
        flipped = sum(1 for f in self.flips if f["flipped"])
        lines += [
            f"pool size B: {self.pool_size}   threshold s: {self.threshold}   margin: {self.margin}",
            f"reviews: {len(self.flips)}   flipped: {flipped}" + ("   (fallback, no revision)" if self.fallback else ""),
            f"tokens: warmup={lg.warmup_tokens} online={lg.online_attempt_tokens} "
            f"review={lg.review_tokens} packet={lg.packet_tokens} total={lg.total}",
        ]
        return "\n".join(lines) + "\n"
