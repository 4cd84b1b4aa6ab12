"""Command-line entry point.

Exit codes: 0 success, 1 violation, 2 input or config error, 3 backend
failure, 4 internal error. Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from decimal import Decimal
from pathlib import Path
from typing import Any, Sequence

from .config import RunConfig, load_config
from .contract import dumps_contract, loads_contract
from .errors import ContractGenError, InputError
from .evaluate import (
    Dimension,
    FeedbackSignal,
    Weights,
    aggregate_score,
    format_delta,
    format_score,
    report_value,
    score_delta,
)
from .pipeline import AdaptExhausted, RunJournal, StageFailure, run
from .render import RenderBlocked
from .scanner import scan
from .story import parse_story, story_template
from .validator import blocking, validate_document

log = logging.getLogger("contractgen")

OK, VIOLATION, INPUT, BACKEND, INTERNAL = 0, 1, 2, 3, 4

MANUSCRIPT = "manuscript.tex"
JOURNAL = "manuscript.journal.jsonl"
SCORE = "score.json"
CONTRACT = "manuscript.contract.json"
SCAN = "manuscript.scan.json"


def dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _read_bytes(path: str | Path, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from exc


def _read_json(path: str | Path, what: str) -> Any:
    try:
        return json.loads(_read_bytes(path, what), parse_float=Decimal)
    except ValueError as exc:
        raise InputError(f"{what} {path} is not valid JSON: {exc}") from exc


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- run


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.fixtures:
        cfg.fixtures = Path(args.fixtures)
    if args.fixed_clock:
        cfg.fixed_clock = True
    if args.strict_sequential:
        cfg.strict_sequential = True
    if getattr(args, "scenario", None):
        cfg.scenario = args.scenario
    if getattr(args, "out", None):
        cfg.output_dir = Path(args.out)
    return cfg


def cmd_run(args: argparse.Namespace) -> int:
    story = parse_story(_read_bytes(args.story, "story"))
    cfg = _run_config(args)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = run(story, cfg)
    except (RenderBlocked, AdaptExhausted, StageFailure) as exc:
        journal = getattr(exc, "journal", None)
        if journal is not None:
            (out / JOURNAL).write_text(journal.dumps(), "utf-8")
        _err(f"error: {exc}")
        for v in getattr(exc, "violations", ()):
            _err(v.format_line())
        for i in getattr(exc, "issues", ()):
            _err(f"{i.severity.value}\t{i.section_id}\t{i.code}\t{i.message}")
        return exc.exit_code
    (out / MANUSCRIPT).write_bytes(res.manuscript.rendered or b"")
    (out / JOURNAL).write_text(res.journal.dumps(), "utf-8")
    score = {
        "aggregate": float(report_value(res.score)),
        "dimensions": {s.dimension.value: s.score for s in res.signals},
    }
    (out / SCORE).write_text(dump_json(score), "utf-8")
    (out / CONTRACT).write_text(dumps_contract(res.contract), "utf-8")
    (out / SCAN).write_text(dump_json(scan(res.manuscript.rendered or b"").to_dict()), "utf-8")
    print(format_score(res.score))
    return OK


# ---------------------------------------------------------------- validate


def cmd_validate(args: argparse.Namespace) -> int:
    tex = _read_bytes(args.tex, "manuscript")
    contract = loads_contract(_read_bytes(args.contract, "contract").decode("utf-8", "replace"))
    violations = validate_document(contract, scan(tex))
    for v in violations:
        print(v.format_line())
    return VIOLATION if blocking(violations) else OK


# ---------------------------------------------------------------- score


def load_signals(data: Any) -> list[FeedbackSignal]:
    """Accept a signal list, ``{"signals": [...]}`` or a ``score.json`` with ``dimensions``."""
    try:
        if isinstance(data, dict) and "dimensions" in data:
            return [FeedbackSignal(d, Dimension(d), float(v)) for d, v in data["dimensions"].items()]
        if isinstance(data, dict):
            data = data["signals"]
        if not isinstance(data, list):
            raise TypeError("expected a list of signals")
        return [FeedbackSignal.from_dict(d) for d in data]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"signals do not match the expected shape: {exc}") from exc


def _aggregate_of(path: str, weights: Weights | None) -> Decimal:
    data = _read_json(path, "signals")
    if isinstance(data, dict) and "aggregate" in data and weights is None:
        return Decimal(str(data["aggregate"]))
    signals = load_signals(data)
    return aggregate_score(signals, weights or _equal_over(signals))


def _equal_over(signals: list[FeedbackSignal]) -> Weights:
    return Weights.equal(s.dimension for s in signals) if signals else Weights.equal()


def cmd_score(args: argparse.Namespace) -> int:
    weights = None
    if args.weights:
        raw = _read_json(args.weights, "weights")
        try:
            weights = Weights(raw.get("weights", raw) if isinstance(raw, dict) else raw)
        except (ValueError, AttributeError) as exc:
            raise InputError(f"weights {args.weights}: {exc}") from exc
    data = _read_json(args.signals, "signals")
    signals = load_signals(data)
    agg = aggregate_score(signals, weights or _equal_over(signals))
    print(format_score(agg))
    if args.compare:
        other = _aggregate_of(args.compare, weights)
        # deltas are taken between the reported (rounded) aggregates
        print(format_delta(score_delta(report_value(agg), report_value(other))))
    return OK


# ---------------------------------------------------------------- journal


def cmd_journal(args: argparse.Namespace) -> int:
    j = RunJournal.loads(_read_bytes(args.journal, "journal").decode("utf-8", "replace"))
    rows = [e for e in j.entries if not args.stage or e.stage in args.stage]
    print(f"{'#':>3}  {'stage':<9} {'scope':<12} {'iter':>4}  {'version':<9} {'err':>4} {'warn':>4}  min score")
    for n, e in enumerate(rows):
        it = "-" if e.iteration is None else str(e.iteration)
        score = f"{min(e.scores.values()):.3f}" if e.scores else "-"
        print(f"{n:>3}  {e.stage:<9} {e.scope:<12} {it:>4}  {e.version_before:>3}->{e.version_after:<4} "
              f"{e.errors:>4} {e.warnings:>4}  {score}")
    if args.assert_monotone and not j.is_monotone():
        _err(f"error counts increase across adapt iterations: {j.adapt_errors()}")
        return VIOLATION
    return OK


# ---------------------------------------------------------------- init


def cmd_init(args: argparse.Namespace) -> int:
    text = story_template()
    if args.out:
        p = Path(args.out)
        if p.exists() and not args.force:
            raise InputError(f"{p} exists; pass --force to overwrite")
        p.write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    return OK


# ---------------------------------------------------------------- parser


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps them from resetting values given earlier
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="TOML run configuration", **kw)
    p.add_argument("--fixtures", help="fixture directory for the scripted backend", **kw)
    p.add_argument("--fixed-clock", action="store_true", help="counter timestamps for byte-stable output", **kw)
    p.add_argument("--strict-sequential", action="store_true",
                   help="draft sections one after another against the updated contract", **kw)
    p.add_argument("-v", "--verbose", action="store_true", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    ap = argparse.ArgumentParser(prog="contractgen", parents=[_global_flags(suppress=False)],
                                 description="Contract-guided manuscript generation and validation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the full pipeline on a story")
    p.add_argument("story")
    p.add_argument("--out", help="output directory (default from config, else .)")
    p.add_argument("--scenario", help="scripted scenario key (default: the story id)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", parents=[common], help="validate a LaTeX file against a contract")
    p.add_argument("tex")
    p.add_argument("contract")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", parents=[common], help="aggregate feedback signals")
    p.add_argument("signals")
    p.add_argument("weights", nargs="?")
    p.add_argument("--compare", metavar="OTHER", help="print the signed delta against another signals file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("journal", parents=[common], help="inspect a run journal")
    p.add_argument("journal")
    p.add_argument("--stage", action="append", help="only show this stage (repeatable)")
    p.add_argument("--assert-monotone", action="store_true",
                   help="exit 1 if error counts increase across adapt iterations")
    p.set_defaults(func=cmd_journal)

    p = sub.add_parser("init", parents=[common], help="write a commented story template")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ContractGenError as exc:
        _err(f"error: {exc}")
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
