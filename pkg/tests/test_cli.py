import json

import pytest

from boxtrace import run
from boxtrace.cli import main
from tests.conftest import CHOICE_PROGRAM, NO_MATCH, TWO_FACTS


@pytest.fixture
def choice_file(tmp_path):
    path = tmp_path / "choice.pl"
    path.write_text(CHOICE_PROGRAM)
    return str(path)


def test_trace_choice_program(choice_file, capsys):
    assert main(["trace", choice_file]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 10
    assert lines[0] == "1 1 1 Call goal"
    assert lines[-1] == "10 1 1 Exit goal"


def test_trace_jsonl(choice_file, capsys):
    assert main(["trace", choice_file, "--format", "jsonl"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    first = json.loads(lines[0])
    assert first == {"chrono": 1, "node": 1, "depth": 1, "port": "Call", "goal": "goal"}


def test_trace_pretty_aligns(choice_file, capsys):
    assert main(["trace", choice_file, "--pretty"]) == 0
    lines = capsys.readouterr().out.rstrip().splitlines()
    assert lines[0] == " 1 1 1 Call goal"
    assert lines[-1] == "10 1 1 Exit goal"


def test_trace_max_solutions(tmp_path, capsys):
    path = tmp_path / "facts.pl"
    path.write_text(TWO_FACTS)
    assert main(["trace", str(path), "--max-solutions", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2  # Call then the first Exit


def test_rebuild_round_trip(choice_file, tmp_path, capsys):
    main(["trace", choice_file])
    trace_text = capsys.readouterr().out
    trace_file = tmp_path / "choice.trace"
    trace_file.write_text(trace_text)

    assert main(["rebuild", str(trace_file)]) == 0
    out = capsys.readouterr().out
    assert "Call2" in out and "Redo1" in out
    assert "final tree:" in out
    assert "status: success" in out
    assert "#4 eq(b,b)" in out


def test_rebuild_missing_file_exits_2(capsys):
    assert main(["rebuild", "missing.trace"]) == 2
    assert "error" in capsys.readouterr().err


def test_rebuild_corrupt_trace_exits_1(tmp_path, capsys):
    trace_file = tmp_path / "bad.trace"
    trace_file.write_text("1 1 1 Call g\n3 1 1 Exit g\n")
    assert main(["rebuild", str(trace_file)]) == 1
    assert "corrupt" in capsys.readouterr().err


def test_rebuild_truncated_trace_exits_1(tmp_path, capsys):
    trace_file = tmp_path / "cut.trace"
    trace_file.write_text("1 1 1 Call p(X)\n2 1 1 Exit p(a)\n3 1 1 Redo p(a)\n")
    assert main(["rebuild", str(trace_file)]) == 1
    assert "truncated" in capsys.readouterr().err


def test_check_pass_exits_0(choice_file, capsys):
    assert main(["check", choice_file]) == 0
    out = capsys.readouterr().out
    assert "pass" in out and "10 steps" in out


def test_check_failing_goal_program_still_passes(tmp_path, capsys):
    path = tmp_path / "nomatch.pl"
    path.write_text(NO_MATCH)
    assert main(["check", str(path)]) == 0


def test_check_limit_hit_exits_1(tmp_path, capsys):
    path = tmp_path / "loop.pl"
    path.write_text("loop :- loop.\n:- loop.")
    assert main(["check", str(path), "--max-steps", "50"]) == 1
    assert "limit-hit" in capsys.readouterr().out


def test_parse_error_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.pl"
    path.write_text("p(a.\n:- p(a).")
    assert main(["trace", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_fuzz_exits_0(capsys):
    assert main(["fuzz", "--seed", "1", "--count", "5", "--max-steps", "2000"]) == 0
    out = capsys.readouterr().out
    assert "5 programs" in out


def test_pipeline_closure(choice_file, tmp_path, capsys):
    # trace -> rebuild reproduces exactly the rule sequence the library run
    # applied: the three surfaces agree on one execution.
    main(["trace", choice_file])
    trace_file = tmp_path / "closure.trace"
    trace_file.write_text(capsys.readouterr().out)

    assert main(["rebuild", str(trace_file)]) == 0
    out_lines = capsys.readouterr().out.splitlines()
    printed_rules = [
        line.split()[1] for line in out_lines if line.strip()[:1].isdigit() and "#" not in line
    ]

    from boxtrace import parse_program

    result = run(parse_program(CHOICE_PROGRAM))
    assert printed_rules == [s.rule.value for s in result.trace.steps]
