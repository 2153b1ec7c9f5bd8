"""Exit criteria. Each test prints one PASS/FAIL line; run with ``-s`` to see them inline.

Everything here runs against the scripted mock and the replay store, no model server.
"""
import json
import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from pacer import kernels, pipeline, theory
from pacer.backend import GenerationSettings, RecordingBackend, ReplayBackend, ScriptEntry, ScriptedBackend
from pacer.config import PacerConfig
from pacer.consensus import build_packet, count_tokens, render_packet
from pacer.extraction import extract_answer
from pacer.revision import cwv, mv
from pacer.screening import EARLY_STOPPED, COMPLETED, Threshold, Trace, consume, estimate_threshold
from pacer.stability import StabilityMonitor, offline_trajectory

import conftest
from conftest import FIXTURES
from scenarios import backend, exp_sum, load
from test_consensus import _structured_pool
from test_screening import keep_oracle

pytestmark = pytest.mark.acceptance


@contextmanager
def criterion(name, budget=None):
    t0 = time.perf_counter()
    info = {}
    try:
        yield info
        elapsed = time.perf_counter() - t0
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
    except BaseException as exc:
        line = f"FAIL  {name}  ({time.perf_counter() - t0:.2f}s) {type(exc).__name__}: {str(exc)[:120]}"
        print(line)
        conftest.ACCEPTANCE_LINES.append(line)
        raise
    detail = info.get("detail", "")
    line = f"PASS  {name}  ({elapsed:.2f}s){'  ' + detail if detail else ''}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def random_logprobs(rng, length, k):
    """Descending non-positive rows with a per-stream scale, occasional spikes and exact zeros."""
    scale = rng.uniform(0.01, 3.0)
    m = -rng.exponential(scale, size=(length, k))
    spikes = rng.random(length) < 0.02
    m[spikes] *= rng.uniform(5, 50)
    m[rng.random((length, k)) < 0.01] = 0.0
    return -np.sort(-m, axis=1)


def test_large_model_results_not_reproduced():
    with criterion("large-model benchmark tables") as info:
        # desk scale: the large-model tables are out of reach, the suites below stand in for them
        info["detail"] = "not reproduced by design (needs large-model serving); covered by the oracle suites"


def test_stability_monotone_and_online_equals_offline():
    rng = np.random.default_rng(2024)
    with criterion("stability monotonicity + online==offline, 10^4 streams", budget=30) as info:
        steps = 0
        for _ in range(10_000):
            length = int(rng.integers(1, 2049))
            k = int(rng.choice([1, 5, 20]))
            window = int(rng.choice([1, 8, 1024]))
            table = random_logprobs(rng, length, k)
            mon = StabilityMonitor(window, k)
            for row in table.tolist():
                mon.update_logprobs(row)
            s = mon.s_values
            assert all(b <= a for a, b in zip(s, s[1:]))
            off = offline_trajectory(table, k, window)
            assert mon.current_stability == off.final_stability
            assert s == off.s
            steps += length
        info["detail"] = f"{steps} steps, kernels={kernels.IMPLEMENTATION}"


def test_early_stop_equivalence():
    rng = np.random.default_rng(7)
    settings = GenerationSettings(model_name="mock")
    with criterion("early-stop equivalence, 10^3 attempts", budget=10) as info:
        stopped = 0
        for i in range(1000):
            length = int(rng.integers(1, 513))
            k = int(rng.choice([1, 5, 20]))
            window = int(rng.choice([1, 8, 64]))
            table = random_logprobs(rng, length, k)
            s_off = offline_trajectory(table, k, window).s
            mode = i % 3
            if mode == 0:
                s = float(rng.uniform(min(s_off) - 0.1, max(s_off) + 0.1))
            elif mode == 1:
                s = float(rng.choice(s_off))  # exact ties with a trajectory value
            else:
                s = float(np.nextafter(rng.choice(s_off), 0.0))
            entry = ScriptEntry(tokens=[""] * length, logprobs=[tuple(r) for r in table.tolist()])
            stream = ScriptedBackend([entry]).open_stream(settings.request("p", f"t{i}"))
            trace = consume(stream, Trace(f"t{i}", i, "online"), k, window, Threshold(s, (s,)))
            below = [t for t, v in enumerate(s_off) if v < s]
            if below:
                assert trace.status == EARLY_STOPPED
                assert trace.generated_tokens == below[0] + 1
                stopped += 1
            else:
                assert min(s_off) >= s
                assert trace.status == COMPLETED and trace.generated_tokens == length
        info["detail"] = f"{stopped} stopped, {1000 - stopped} ran to completion"


def test_percentile_screening_oracle():
    rnd = random.Random(11)
    with criterion("percentile/screening oracle, n=1..64") as info:
        checked = 0
        for n in range(1, 65):
            for eta in (5, 10, 25, 50):
                for rep in range(25):
                    if rep % 2:
                        values = [-rnd.random() for _ in range(n)]
                    else:  # heavy ties
                        values = [-rnd.choice([0.1, 0.2, 0.3, 0.4]) for _ in range(n)]
                    thr = estimate_threshold(values, eta)
                    assert [v >= thr.s for v in values] == keep_oracle(values, eta)
                    checked += 1
        info["detail"] = f"{checked} warmup sets"


def test_extraction_fixtures():
    cases = json.loads((FIXTURES / "extraction_cases.json").read_text(encoding="utf-8"))
    studies = json.loads((FIXTURES / "case_studies.json").read_text(encoding="utf-8"))
    with criterion("extraction fixtures 100%") as info:
        misses = []
        for c in cases + studies:
            got = extract_answer(c["text"])
            got = None if got is None else got.canonical
            if got != c["expected"]:
                misses.append((c.get("id", c.get("name")), got, c["expected"]))
        by_name = {c["name"]: c for c in studies}
        assert extract_answer(by_name["roots_revised"]["text"]).canonical == "240"
        assert extract_answer(by_name["cards_revised"]["text"]).canonical == "\\frac{737}{39}"
        assert len(cases) >= 50
        assert not misses, misses
        info["detail"] = f"{len(cases)} adversarial + {len(studies)} case-study texts"


def test_packet_boundedness():
    with criterion("packet boundedness, pools of 5 and 500") as info:
        small_pool, large_pool = _structured_pool(1), _structured_pool(100)
        assert (small_pool.size, large_pool.size) == (5, 500)
        small = render_packet(build_packet(small_pool, n=4, l_sum=64))
        large = render_packet(build_packet(large_pool, n=4, l_sum=64))
        assert small.encode() == large.encode()
        assert count_tokens(small) <= 4 * 64 + 64
        info["detail"] = f"{count_tokens(small)} tokens <= {4 * 64 + 64}"


def _brute_tally(answers, weights):
    tally, counts = {}, {}
    for a, w in zip(answers, weights):
        tally[a] = tally.get(a, 0.0) + w
        counts[a] = counts.get(a, 0) + 1
    return tally, counts


def test_voting_oracles():
    rnd = random.Random(5)
    with criterion("voting oracles, 10^4 multisets") as info:
        for _ in range(10_000):
            n = rnd.randint(1, 40)
            answers = [rnd.choice("abcdefg"[: rnd.randint(1, 7)]) for _ in range(n)]
            # unit weights reduce to plurality
            unit = cwv(answers, [1.0] * n)
            plural = mv(answers)
            assert unit.winner == plural.winner
            assert unit.counts == plural.counts
            # weighted tallies against the brute-force sum
            weights = [math.exp(-rnd.random() * 3) for _ in range(n)]
            res = cwv(answers, weights)
            tally, counts = _brute_tally(answers, weights)
            assert res.tally == tally and res.counts == counts
            best = min(tally, key=lambda a: (-tally[a], -counts[a], a))
            assert res.winner == best
            # deterministic under reordering
            order = list(range(n))
            rnd.shuffle(order)
            assert mv([answers[i] for i in order]).winner == plural.winner
        # explicit tie rules
        assert cwv(["b", "a"], [1.0, 1.0]).winner == "a"
        assert cwv(["b", "a", "a"], [1.0, 0.5, 0.5]).winner == "a"
        info["detail"] = "unit==mv, tallies exact, ties by count then answer"


def test_flip_scenario():
    cfg, be, data = backend("flip_scenario")
    exp = data["expected"]
    with criterion("end-to-end flip scenario") as info:
        rep = pipeline.run(cfg, "problem", be)
        assert rep.methods["online"]["answer"] == exp["online"]["answer"] == "188"
        assert rep.methods["pacer"]["answer"] == exp["pacer"]["answer"] == "240"
        assert [f["trace_id"] for f in rep.flips if f["flipped"]] == exp["flipped"]
        for name in ("online", "pacer"):
            tally = rep.methods[name]["tally"]
            # hand values are written to 6 decimals
            assert {a: round(v, 6) for a, v in tally.items()} == exp[name]["tally"]
        stab = [a["logprob"] for a in data["attempts"]]
        assert rep.methods["online"]["tally"] == {"188": exp_sum(stab[:3]), "240": exp_sum(stab[3:])}
        info["detail"] = f"online {rep.methods['online']['answer']} -> pacer {rep.final_answer}"


def test_token_ledger_exact():
    with criterion("token ledger 350") as info:
        cfg, be, data = backend("ledger_scenario")
        rep = pipeline.run(cfg, "problem", be)
        d = rep.ledger.to_dict()
        assert (d["warmup_tokens"], d["online_attempt_tokens"], d["review_tokens"], d["packet_tokens"], d["total"]) \
            == (200, 110, 40, 0, 350)
        assert d == data["expected"]["ledger"]
        cfg, be, _ = backend("flip_scenario")
        assert pipeline.run(cfg, "problem", be).ledger.packet_tokens == 0
        info["detail"] = str(d)


def test_theory_suite():
    with criterion("theory suite", budget=300) as info:
        est = theory.simulate_revision(theory.RevisionModel(0.6, 0.5, 0.2), 1_000_000, seed=0)
        assert theory.post_review_accuracy(0.6, 0.5, 0.2) == pytest.approx(0.68, abs=1e-15)
        assert abs(est.post_accuracy - 0.68) <= 0.003

        # boundary points where alpha = p beta / (1 - p) is an exact double
        rnd = random.Random(3)
        boundary = 0
        while boundary < 1000:
            p = Fraction(rnd.randint(1, 255), 256)
            beta = Fraction(rnd.randint(0, 256), 256)
            alpha = p * beta / (1 - p)
            if alpha > 1 or Fraction(float(alpha)) != alpha:
                continue
            assert theory.stabilizing_check(float(p), float(alpha), float(beta))
            assert theory.post_review_accuracy(float(p), float(alpha), float(beta)) == float(p)
            boundary += 1

        rows = theory.vote_error_sweep(trials=100_000, seed=1)
        rows.append({**theory.vote_error_sweep((33,), (0.68,), trials=100_000, seed=99)[0]})
        worst = -math.inf
        for r in rows:
            se = math.sqrt(r["empirical_error"] * (1 - r["empirical_error"]) / r["trials"])
            assert r["empirical_error"] <= r["bound"] + 3 * se, r
            worst = max(worst, r["empirical_error"] - r["bound"])

        rng = np.random.default_rng(17)
        for _ in range(1000):
            b = int(rng.integers(1, 1001))
            p = float(rng.uniform(0.5, 0.999))
            d = float((1.0 - p) * rng.random())
            if not p + d > 0.5:
                continue
            got = theory.voi_exponent_gain(b, p, d)
            exact = 2 * b * ((Fraction(p) + Fraction(d) - Fraction(1, 2)) ** 2 - (Fraction(p) - Fraction(1, 2)) ** 2)
            assert abs(Fraction(got) - exact) <= Fraction(1, 10**12) * abs(exact)
        info["detail"] = (f"MC post={est.post_accuracy:.5f}; {len(rows)} sweep points, "
                          f"max(err-bound)={worst:+.4f}")


def _random_session(seed):
    rnd = random.Random(seed)
    entries = []
    for i in range(8):
        n = rnd.randint(20, 120)
        rows = [tuple(sorted((-rnd.random() * rnd.choice([0.1, 1.0]) for _ in range(2)), reverse=True))
                for _ in range(n)]
        text = f"work {i} \\boxed{{{rnd.choice(['3', '4', '5'])}}}"
        tokens = [""] * n
        tokens[-1] = text
        entries.append(ScriptEntry(tokens=tokens, logprobs=rows))
    # generous review budget; reviews either keep or switch
    for _ in range(8):
        entries.append(ScriptEntry.constant(6, (-0.2, -0.3), rnd.choice(["keep", "\\boxed{4}"])))
    return PacerConfig(n_try=8, n_init=4, eta=50, k=2, window=16, parallel=4, l_rev=16), entries


def test_replay_determinism(tmp_path):
    with criterion("replay determinism") as info:
        sessions = []
        for name in ("flip_scenario", "ledger_scenario"):
            cfg, entries, _ = load(name)
            sessions.append((name, cfg, entries))
        for seed in range(3):
            sessions.append((f"random{seed}", *_random_session(seed)))
        for name, cfg, entries in sessions:
            store = tmp_path / f"{name}.jsonl"
            live = pipeline.run(cfg, "problem", RecordingBackend(ScriptedBackend(entries), store)).to_json()
            first = pipeline.run(cfg, "problem", ReplayBackend(store)).to_json()
            second = pipeline.run(cfg, "problem", ReplayBackend(store)).to_json()
            assert first.encode() == second.encode()
            assert first == live
        info["detail"] = f"{len(sessions)} recorded sessions"
