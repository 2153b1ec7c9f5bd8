"""Final-answer extraction and canonical vote keys.

Answers are taken from the last ``\\boxed{...}`` group; when there is none,
the last numeric span in the text is used. Vote keys are syntactic: no
mathematical equivalence is attempted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import ExtractionFailure

BOX_OPEN = "\\boxed{"

_NUMERIC = re.compile(r"\d+/\d+|\d+(?:\.\d+)?")
_WS = re.compile(r"\s+")
_PURE_INT = re.compile(r"\d+")


@dataclass(frozen=True)
class CanonicalAnswer:
    raw: str
    canonical: str

    def __str__(self) -> str:
        return self.canonical


def extract_boxed(text: str) -> Optional[str]:
    """Content of the last ``\\boxed{...}``, or None if that group never closes."""
    start = text.rfind(BOX_OPEN)
    if start < 0:
        return None
    i = start + len(BOX_OPEN)
    depth = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            # escapes the next character, so \{ and \} do not count
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + len(BOX_OPEN) : i]
        i += 1
    return None


def fallback_numeric(text: str) -> Optional[str]:
    """Last integer, decimal or digits/digits span in ``text``."""
    last = None
    for m in _NUMERIC.finditer(text):
        last = m
    return None if last is None else last.group(0)


def canonicalize(raw: str) -> CanonicalAnswer:
    s = _WS.sub(" ", raw.strip())
    # repeat so canonicalize is idempotent on "$$x$$"-style wrapping
    while len(s) >= 2 and s[0] == "$" and s[-1] == "$":
        s = _WS.sub(" ", s[1:-1].strip())
    if _PURE_INT.fullmatch(s):
        s = s.lstrip("0") or "0"
    if not s:
        raise ExtractionFailure(f"empty answer after canonicalization: {raw!r}")
    return CanonicalAnswer(raw=raw, canonical=s)


def extract_answer(
    text: str, equivalence: Callable[[str], str] | None = None
) -> Optional[CanonicalAnswer]:
    """Boxed answer, else last numeric span, canonicalized; None on failure.

    ``equivalence`` may map canonical strings onto a shared key (e.g. a CAS
    normal form); it is not used by default.
    """
    ans = _canonical_or_none(extract_boxed(text))
    if ans is None:
        # an empty \boxed{} falls through to the numeric heuristic too
        ans = _canonical_or_none(fallback_numeric(text))
    if ans is not None and equivalence is not None:
        ans = CanonicalAnswer(raw=ans.raw, canonical=equivalence(ans.canonical))
    return ans


def _canonical_or_none(raw: Optional[str]) -> Optional[CanonicalAnswer]:
    if raw is None:
        return None
    try:
        return canonicalize(raw)
    except ExtractionFailure:
        return None
