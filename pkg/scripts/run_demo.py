"""Run every scripted scenario against the packaged demo story and summarize.

Usage: python scripts/run_demo.py [--out DIR] [--strict-sequential]

For each scenario prints the outcome, the journal stage sequence and the
error counts of the adapt iterations. Successful runs write their outputs
under DIR/<scenario>/ through the CLI.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import sys
import tempfile
from pathlib import Path

from contractgen import cli
from contractgen.config import packaged_stories
from contractgen.pipeline import RunJournal

SCENARIOS = ["demo", "corrective", "explain", "unplaced", "stuck", "rogue", "dropsection"]


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--strict-sequential", action="store_true")
    args = ap.parse_args(argv)
    root = args.out or Path(tempfile.mkdtemp(prefix="contractgen-demo-"))
    story = packaged_stories() / "demo.json"

    for scenario in SCENARIOS:
        out = root / scenario
        flags = ["--fixed-clock"] + (["--strict-sequential"] if args.strict_sequential else [])
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = cli.main(flags + ["run", str(story), "--out", str(out), "--scenario", scenario])
        journal = out / cli.JOURNAL
        stages = errs = "-"
        if journal.is_file():
            j = RunJournal.loads(journal.read_text())
            stages, errs = " ".join(j.stages()), str(j.adapt_errors())
        result = stdout.getvalue().strip() or stderr.getvalue().splitlines()[0]
        print(f"{scenario:<12} exit {code}  {result}")
        print(f"{'':<12} stages: {stages}")
        print(f"{'':<12} adapt errors: {errs}")
    print(f"outputs under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
