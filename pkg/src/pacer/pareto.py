"""Accuracy-versus-tokens rows for a batch of run reports."""
from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from .errors import ExtractionFailure
from .extraction import canonicalize
from .report import RunReport

log = logging.getLogger(__name__)

METHODS = ("pacer", "online", "mv")
CSV_FIELDS = ("method", "budget", "tokens", "accuracy", "n")


def load_ground_truth(path) -> dict[str, str]:
    """Two columns, problem id and answer, comma- or tab-separated. A header row is skipped."""
    truth = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        sep = "\t" if "\t" in line else ","
        pid, _, ans = line.partition(sep)
        pid, ans = pid.strip(), ans.strip()
        if line_no == 1 and pid.lower() in ("problem_id", "id"):
            continue
        truth[pid] = ans
    return truth


def _canon(ans) -> str | None:
    if ans is None:
        return None
    try:
        return canonicalize(str(ans)).canonical
    except ExtractionFailure:
        return None


def method_tokens(report: RunReport, method: str) -> int:
    # baselines stop after screening, only PACER pays for reviews
    return report.ledger.total if method == "pacer" else report.ledger.screening_total


def pareto(reports: Iterable[RunReport], truth: dict[str, str]) -> list[dict]:
    """One row per (method, n_try budget): mean total tokens and accuracy."""
    groups: dict[tuple, list] = defaultdict(list)
    for rep in reports:
        if rep.problem_id not in truth:
            log.warning("no ground truth for %s; skipped", rep.problem_id)
            continue
        gold = _canon(truth[rep.problem_id])
        for m in METHODS:
            if m not in rep.methods:
                continue
            ok = gold is not None and _canon(rep.methods[m]["answer"]) == gold
            groups[(m, rep.n_try)].append((method_tokens(rep, m), ok))
    rows = []
    for (m, budget) in sorted(groups, key=lambda g: (METHODS.index(g[0]), g[1])):
        items = groups[(m, budget)]
        rows.append({
            "method": m,
            "budget": budget,
            "tokens": sum(t for t, _ in items) / len(items),
            "accuracy": sum(ok for _, ok in items) / len(items),
            "n": len(items),
        })
    return rows


def rows_to_csv(rows: list[dict], fields=CSV_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
