from __future__ import annotations

import json

import pytest

from contractgen import cli
from contractgen.agents import BackendUnavailable
from contractgen.errors import ContractGenError
from contractgen.pipeline import StageFailure, RunJournal


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def demo_out(tmp_path, story_path, capsys):
    out = tmp_path / "demo"
    code, stdout, _ = run_cli(capsys, "--fixed-clock", "run", story_path, "--out", out)
    assert code == 0
    return out, stdout


def signals_file(path, scores):
    dims = ["structural_integrity", "writing_clarity", "methodological_rigor", "experimental_substance"]
    path.write_text(json.dumps([
        {"evaluator_id": f"m{i}", "dimension": d, "score": s} for i, (d, s) in enumerate(zip(dims, scores))]))
    return path


# ---------------------------------------------------------------- run


def test_run_writes_outputs(demo_out):
    out, stdout = demo_out
    for name in (cli.MANUSCRIPT, cli.JOURNAL, cli.SCORE, cli.CONTRACT, cli.SCAN):
        assert (out / name).is_file()
    score = json.loads((out / cli.SCORE).read_text())
    assert stdout.strip() == f"{score['aggregate']:.3f}"
    assert set(score) == {"aggregate", "dimensions"}
    assert (out / cli.SCORE).read_text().endswith("}\n")


def test_run_is_byte_stable(tmp_path, story_path, capsys, demo_out):
    first, _ = demo_out
    second = tmp_path / "again"
    assert run_cli(capsys, "run", story_path, "--out", second, "--fixed-clock")[0] == 0
    for name in (cli.MANUSCRIPT, cli.SCORE, cli.JOURNAL):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_run_missing_story(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", tmp_path / "nope.json", "--out", tmp_path)
    assert code == 2 and "cannot read story" in err


def test_run_schema_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1}')
    assert run_cli(capsys, "run", bad, "--out", tmp_path)[0] == 2


@pytest.mark.parametrize("scenario, code", [("stuck", 1), ("unplaced", 1), ("rogue", 1), ("nosuch", 3)])
def test_run_failing_scenarios(tmp_path, story_path, capsys, scenario, code):
    got, _, err = run_cli(capsys, "--fixed-clock", "run", story_path, "--out", tmp_path, "--scenario", scenario)
    assert got == code
    assert err.startswith("error:")
    if scenario == "stuck":
        assert "MissingVisualMarker" in err
        assert (tmp_path / cli.JOURNAL).is_file()
    if scenario == "unplaced":
        assert "fig:a" in err


def test_run_with_config_file(tmp_path, story_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'[run]\nscenario = "corrective"\nfixed_clock = true\noutput_dir = "{tmp_path / "o"}"\n')
    assert run_cli(capsys, "--config", cfg, "run", story_path)[0] == 0
    assert (tmp_path / "o" / cli.MANUSCRIPT).is_file()


def test_bad_config_key(tmp_path, story_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[run]\nspeed = 11\n")
    assert run_cli(capsys, "--config", cfg, "run", story_path)[0] == 2


def test_backend_failure_maps_to_3(tmp_path, story_path, capsys, monkeypatch):
    def boom(story, cfg):
        raise StageFailure("write", BackendUnavailable("connection refused"), RunJournal())
    monkeypatch.setattr(cli, "run", boom)
    assert run_cli(capsys, "run", story_path, "--out", tmp_path)[0] == 3


# ---------------------------------------------------------------- validate


def test_validate_clean(demo_out, capsys):
    out, _ = demo_out
    code, stdout, _ = run_cli(capsys, "validate", out / cli.MANUSCRIPT, out / cli.CONTRACT)
    assert (code, stdout) == (0, "")


def test_validate_dangling_ref(demo_out, capsys, tmp_path):
    out, _ = demo_out
    tex = tmp_path / "m.tex"
    text = (out / cli.MANUSCRIPT).read_text().replace("\\end{document}", "See \\ref{fig:nowhere}.\n\\end{document}")
    tex.write_text(text)
    code, stdout, _ = run_cli(capsys, "validate", tex, out / cli.CONTRACT)
    lines = stdout.splitlines()
    assert code == 1 and len(lines) == 1
    severity, where, rule, message = lines[0].split("\t")
    assert (severity, rule) == ("error", "RefResolves") and "fig:nowhere" in message


@pytest.mark.parametrize("contract", ["{not json", '{"log": [{"action": "Nope"}]}', "[]"])
def test_validate_malformed_contract(demo_out, capsys, tmp_path, contract):
    out, _ = demo_out
    bad = tmp_path / "c.json"
    bad.write_text(contract)
    assert run_cli(capsys, "validate", out / cli.MANUSCRIPT, bad)[0] == 2


def test_validate_unbalanced_tex(demo_out, capsys, tmp_path):
    out, _ = demo_out
    tex = tmp_path / "m.tex"
    tex.write_text("\\begin{figure}\n")
    code, _, err = run_cli(capsys, "validate", tex, out / cli.CONTRACT)
    assert code == 2 and "figure" in err


# ---------------------------------------------------------------- score


def test_score_and_compare(tmp_path, capsys):
    a = signals_file(tmp_path / "a.json", [5.962, 6.153, 6.257, 6.207])
    b = signals_file(tmp_path / "b.json", [4.078, 3.864, 3.934, 3.975])
    assert run_cli(capsys, "score", a)[1] == "6.145\n"
    assert run_cli(capsys, "score", a, "--compare", b)[1] == "6.145\n+2.182\n"


def test_score_reads_score_json(demo_out, capsys):
    out, stdout = demo_out
    assert run_cli(capsys, "score", out / cli.SCORE)[1] == stdout


def test_score_with_weights(tmp_path, capsys):
    a = signals_file(tmp_path / "a.json", [2.0, 6.0, 0.0, 0.0])
    w = tmp_path / "w.json"
    w.write_text(json.dumps({"weights": {"structural_integrity": 1, "writing_clarity": 3}}))
    assert run_cli(capsys, "score", a, w)[1] == "5.000\n"


@pytest.mark.parametrize("content", ["[]", "{", '[{"dimension": "x"}]', '{"signals": 3}'])
def test_score_bad_input(tmp_path, capsys, content):
    f = tmp_path / "s.json"
    f.write_text(content)
    assert run_cli(capsys, "score", f)[0] == 2


def test_score_duplicate_dimension(tmp_path, capsys):
    f = tmp_path / "s.json"
    f.write_text(json.dumps([{"evaluator_id": "a", "dimension": "writing_clarity", "score": 1},
                             {"evaluator_id": "b", "dimension": "writing_clarity", "score": 2}]))
    assert run_cli(capsys, "score", f)[0] == 1


def test_score_negative_weight(tmp_path, capsys):
    a = signals_file(tmp_path / "a.json", [1, 2, 3, 4])
    w = tmp_path / "w.json"
    w.write_text('{"writing_clarity": -1}')
    assert run_cli(capsys, "score", a, w)[0] == 2


# ---------------------------------------------------------------- journal


def test_journal_table(demo_out, capsys):
    out, _ = demo_out
    code, stdout, _ = run_cli(capsys, "journal", out / cli.JOURNAL)
    rows = stdout.splitlines()[1:]
    assert code == 0 and len(rows) >= 6
    assert [r.split()[1] for r in rows] == ["architect", "write", "write", "evaluate", "evaluate",
                                            "refine", "evaluate", "render"]


def test_journal_stage_filter(demo_out, capsys):
    out, _ = demo_out
    stdout = run_cli(capsys, "journal", out / cli.JOURNAL, "--stage", "write")[1]
    assert len(stdout.splitlines()) == 3


def test_journal_monotone_on_corrective(tmp_path, story_path, capsys):
    run_cli(capsys, "--fixed-clock", "run", story_path, "--out", tmp_path, "--scenario", "corrective")
    assert run_cli(capsys, "journal", tmp_path / cli.JOURNAL, "--assert-monotone")[0] == 0


def test_journal_not_monotone(tmp_path, capsys):
    j = RunJournal(fixed_clock=True)
    for it, e in enumerate([0, 2]):
        j.append("evaluate", "manuscript", 0, 0, iteration=it, errors=e)
    p = tmp_path / "j.jsonl"
    p.write_text(j.dumps())
    code, _, err = run_cli(capsys, "journal", p, "--assert-monotone")
    assert code == 1 and "[0, 2]" in err


def test_journal_corrupted_line(demo_out, capsys, tmp_path):
    out, _ = demo_out
    lines = (out / cli.JOURNAL).read_text().splitlines()
    lines[3] = lines[3][:-5]
    bad = tmp_path / "j.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run_cli(capsys, "journal", bad)
    assert code == 2 and "line 4" in err


# ---------------------------------------------------------------- init


def test_init_stdout_and_file(tmp_path, capsys):
    code, stdout, _ = run_cli(capsys, "init")
    assert code == 0 and json.loads(stdout)["schema_version"] == 1
    target = tmp_path / "story.json"
    assert run_cli(capsys, "init", "--out", target)[0] == 0
    assert run_cli(capsys, "init", "--out", target)[0] == 2
    assert run_cli(capsys, "init", "--out", target, "--force")[0] == 0


def test_init_template_runs_through_parser(tmp_path, capsys):
    target = tmp_path / "story.json"
    run_cli(capsys, "init", "--out", target)
    from contractgen.story import parse_story
    assert parse_story(target.read_bytes()).id == "my-story"


# ---------------------------------------------------------------- exit-code totality


def _error_classes(base=ContractGenError):
    out = [base]
    for sub in base.__subclasses__():
        out += _error_classes(sub)
    return out


@pytest.mark.parametrize("cls", _error_classes(), ids=lambda c: c.__name__)
def test_every_error_maps_to_one_documented_code(cls, capsys, monkeypatch, tmp_path):
    exc = cls.__new__(cls)
    Exception.__init__(exc, "injected")
    expected = exc.exit_code
    assert expected in (1, 2, 3, 4)

    def boom(args):
        raise exc
    monkeypatch.setattr(cli, "cmd_init", boom)
    code, _, err = run_cli(capsys, "init")
    assert code == expected and "injected" in err


def test_unexpected_exception_is_internal(capsys, monkeypatch):
    def boom(args):
        raise RuntimeError("kaboom")
    monkeypatch.setattr(cli, "cmd_init", boom)
    code, _, err = run_cli(capsys, "init")
    assert code == 4 and "kaboom" in err
