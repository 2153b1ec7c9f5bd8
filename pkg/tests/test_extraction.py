import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacer.errors import ExtractionFailure
from pacer.extraction import canonicalize, extract_answer, extract_boxed, fallback_numeric

from conftest import FIXTURES

CASES = json.loads((FIXTURES / "extraction_cases.json").read_text(encoding="utf-8"))
CASE_STUDIES = json.loads((FIXTURES / "case_studies.json").read_text(encoding="utf-8"))


def _answer(text):
    a = extract_answer(text)
    return None if a is None else a.canonical


def test_fixture_has_fifty_cases():
    assert len(CASES) >= 50


@pytest.mark.parametrize("case", CASES, ids=lambda c: f"{c['id']:02d}")
def test_hand_labelled_case(case):
    assert _answer(case["text"]) == case["expected"], case["note"]


@pytest.mark.parametrize("case", CASE_STUDIES, ids=lambda c: c["name"])
def test_case_study_answers(case):
    assert _answer(case["text"]) == case["expected"]


def test_last_box_wins():
    assert extract_boxed(r"... \boxed{42} ... therefore \boxed{7}") == "7"


def test_nested_fraction():
    assert extract_boxed(r"\boxed{\frac{737}{39}}") == r"\frac{737}{39}"


def test_no_box():
    assert extract_boxed("plain text") is None


def test_unbalanced_box_is_absent():
    assert extract_boxed(r"\boxed{\frac{1}{2}") is None


@pytest.mark.parametrize(
    "text, expected",
    [
        ("the answer is 17.", "17"),
        ("values 8, 32, 200 sum to 240", "240"),
        ("no numbers here", None),
        ("7/8 or 0.25", "0.25"),
    ],
)
def test_fallback_numeric(text, expected):
    assert fallback_numeric(text) == expected


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("  240 ", "240"),
        ("007", "7"),
        (r"\frac{737}{39}", r"\frac{737}{39}"),
        ("a \n\t b", "a b"),
        ("$x + 1$", "x + 1"),
        ("$$5$$", "5"),
        ("-007", "-007"),
    ],
)
def test_canonicalize(raw, expected):
    c = canonicalize(raw)
    assert c.canonical == expected
    assert c.raw == raw


@pytest.mark.parametrize("raw", ["", "   ", "$$", "$ $"])
def test_canonicalize_empty_fails(raw):
    with pytest.raises(ExtractionFailure):
        canonicalize(raw)


def test_equivalence_hook():
    a = extract_answer(r"\boxed{\frac{1}{2}}", equivalence=lambda s: "1/2" if s == r"\frac{1}{2}" else s)
    assert a.canonical == "1/2"
    assert a.raw == r"\frac{1}{2}"


# payloads free of backslashes and braces; the prefix is arbitrary text
payloads = st.text(
    alphabet=st.characters(blacklist_characters="\\{}", blacklist_categories=("Cs",)),
    min_size=1,
)


@settings(max_examples=500)
@given(st.text(), payloads)
def test_embed_then_extract_is_identity(prefix, payload):
    assert extract_boxed(prefix + "\\boxed{" + payload + "}") == payload


@settings(max_examples=500)
@given(st.text())
def test_parsing_is_total(text):
    a = extract_answer(text)
    assert a is None or a.canonical


@settings(max_examples=300)
@given(st.text(alphabet="\\{}boxed$ 0123a/.", max_size=40))
def test_parsing_is_total_on_brace_soup(text):
    a = extract_answer(text)
    assert a is None or a.canonical


@settings(max_examples=500)
@given(st.text(min_size=1))
def test_canonicalize_is_idempotent(raw):
    try:
        c = canonicalize(raw).canonical
    except ExtractionFailure:
        return
    assert canonicalize(c).canonical == c
