"""Command-line entry point: run, replay, simulate, pareto, inspect."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .backend import OpenAICompatibleBackend, RecordingBackend, ReplayBackend, ScriptedBackend, replay
from .config import PacerConfig
from .errors import PacerError
from .pareto import CSV_FIELDS, load_ground_truth, pareto, rows_to_csv
from .pipeline import run
from .report import RunReport
from .stability import trajectory_of_steps
from . import theory

log = logging.getLogger("pacer")

SWEEP_FIELDS = ("B", "p_prime", "empirical_error", "bound", "trials", "seed")
REVISION_FIELDS = ("p", "alpha", "beta", "trials", "seed", "pre_accuracy", "post_accuracy",
                   "post_ci_low", "post_ci_high", "expected_post")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config file")
    g = p.add_argument_group("config overrides")
    for f in fields(PacerConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            conv = {"int": int, "float": float, "str": str}.get(str(f.type), str)
            g.add_argument(flag, dest=f.name, type=conv, default=None)


def _config_from(args, base: dict | None = None) -> PacerConfig:
    cfg = PacerConfig.from_dict(base or {})
    if args.config:
        cfg = PacerConfig.from_file(args.config)
    return cfg.with_overrides(**{f.name: getattr(args, f.name) for f in fields(PacerConfig)})


def _problem(args) -> tuple[str | None, str | None]:
    if getattr(args, "problem", None):
        path = Path(args.problem)
        return path.read_text(encoding="utf-8"), args.problem_id or path.stem
    if getattr(args, "prompt", None):
        return args.prompt, args.problem_id or "prompt"
    return None, args.problem_id


def _emit(report: RunReport, args) -> None:
    text = report.to_json() if args.json else report.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _config_from(args)
    problem, pid = _problem(args)
    if problem is None:
        raise SystemExit("run: give --problem FILE or --prompt TEXT")
    if args.mock:
        backend = ScriptedBackend.from_file(args.mock)
    else:
        if not cfg.endpoint:
            raise SystemExit("run: give --endpoint URL (or --mock SCRIPT)")
        backend = OpenAICompatibleBackend(cfg.endpoint, cfg.model, api=cfg.api, api_key_env=cfg.api_key_env)
    if args.record:
        meta = {"problem_id": pid, "problem": problem, "config": cfg.to_dict()}
        backend = RecordingBackend(backend, args.record, meta=meta)
    _emit(run(cfg, problem, backend, problem_id=pid), args)
    return 0


def cmd_replay(args) -> int:
    backend = ReplayBackend(args.store)
    meta = backend.meta
    cfg = _config_from(args, base=meta.get("config"))
    problem, pid = _problem(args)
    if problem is None:
        problem = meta.get("problem")
        pid = pid or meta.get("problem_id", "problem")
    if problem is None:
        raise SystemExit("replay: store has no problem text; give --problem or --prompt")
    _emit(run(cfg, problem, backend, problem_id=pid), args)
    return 0


def _write_csv(rows, fieldnames, out) -> None:
    text = rows_to_csv(rows, fieldnames)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    if args.kind == "revision":
        model = theory.RevisionModel(args.p, args.alpha, args.beta)
        est = theory.simulate_revision(model, args.trials, seed=args.seed, workers=args.workers)
        row = {
            "p": args.p, "alpha": args.alpha, "beta": args.beta, "trials": args.trials, "seed": args.seed,
            "pre_accuracy": est.pre_accuracy, "post_accuracy": est.post_accuracy,
            "post_ci_low": est.post_ci[0], "post_ci_high": est.post_ci[1],
            "expected_post": est.expected_post,
        }
        _write_csv([row], REVISION_FIELDS, args.out)
        return 0
    rows = theory.vote_error_sweep(
        pool_sizes=args.B or theory.DEFAULT_POOL_SIZES,
        p_primes=args.p_prime or theory.DEFAULT_P_PRIMES,
        trials=args.trials,
        seed=args.seed,
        weights=args.weights,
        wrong_answer_arity=args.arity,
        workers=args.workers,
    )
    _write_csv(rows, SWEEP_FIELDS, args.out)
    return 0


def cmd_pareto(args) -> int:
    truth = load_ground_truth(args.truth)
    reports = [RunReport.from_dict(json.loads(Path(p).read_text(encoding="utf-8"))) for p in args.reports]
    _write_csv(pareto(reports, truth), CSV_FIELDS, args.out)
    return 0


def cmd_inspect(args) -> int:
    rec = next((r for r in replay(args.store) if r.trace_id == args.trace_id), None)
    if rec is None:
        print(f"inspect: no trace {args.trace_id!r} in {args.store}", file=sys.stderr)
        return 1
    k = args.k or rec.request.top_logprobs
    traj = trajectory_of_steps(rec.steps, k, args.window)
    if args.json:
        json.dump({"trace_id": rec.trace_id, "k": k, "window": args.window, "u": traj.u,
                   "ubar": traj.ubar, "s": traj.s, "final_stability": traj.final_stability,
                   "finish_reason": rec.finish_reason}, sys.stdout)
        sys.stdout.write("\n")
    else:
        print("t\tU\tUbar\tS")
        for t, (u, ub, s) in enumerate(zip(traj.u, traj.ubar, traj.s), start=1):
            print(f"{t}\t{u:.6g}\t{ub:.6g}\t{s:.6g}")
        print(f"# final S = {traj.final_stability:.9g} ({rec.finish_reason}, {len(traj)} steps)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pacer", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="screen, build the packet, review and vote on one problem")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--problem", help="file holding the problem text")
    src.add_argument("--prompt", help="problem text given inline")
    p.add_argument("--problem-id")
    p.add_argument("--mock", type=Path, help="scripted backend JSON instead of a live endpoint")
    p.add_argument("--record", type=Path, help="append every stream to this JSONL store")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="rerun a recorded session offline")
    p.add_argument("store", type=Path)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--problem")
    src.add_argument("--prompt")
    p.add_argument("--problem-id")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simulate", help="Monte-Carlo checks of the voting and revision analysis")
    p.add_argument("--kind", choices=("vote", "revision"), default="vote")
    p.add_argument("--B", type=int, action="append", help="pool size (repeatable)")
    p.add_argument("--p-prime", type=float, action="append", help="per-trace accuracy (repeatable)")
    p.add_argument("--weights", choices=("unit", "lognormal"), default="unit")
    p.add_argument("--arity", type=int, default=3, help="number of distinct wrong answers")
    p.add_argument("--p", type=float, default=0.6)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pareto", help="accuracy vs tokens rows from report JSON files")
    p.add_argument("reports", nargs="*", type=Path)
    p.add_argument("--truth", type=Path, required=True, help="problem_id,answer file")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("inspect", help="stability trajectory of one recorded trace")
    p.add_argument("store", type=Path)
    p.add_argument("--trace-id", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--window", type=int, default=1024)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PacerError as exc:
        print(f"pacer: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
