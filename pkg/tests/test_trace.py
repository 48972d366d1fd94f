import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxtrace import (
    Atom,
    Compound,
    Engine,
    ParseError,
    Port,
    TraceEvent,
    Variable,
    alpha_equal,
    event_from_json,
    event_to_json,
    events_alpha_equal,
    extract,
    extract_trace,
    is_instance_of,
    node_depth,
    parse_event,
    parse_trace_text,
    render_event,
    run,
    stream_events,
    write_trace_text,
)
from boxtrace.trace import render_events_pretty

# The reference event table for the running example (variables compared up
# to renaming).
CHOICE_EVENTS = [
    (1, 1, 1, "Call", "goal"),
    (2, 2, 2, "Call", "p(X)"),
    (3, 2, 2, "Exit", "p(a)"),
    (4, 3, 2, "Call", "eq(a,b)"),
    (5, 3, 2, "Fail", "eq(a,b)"),
    (6, 2, 2, "Redo", "p(a)"),
    (7, 2, 2, "Exit", "p(b)"),
    (8, 4, 2, "Call", "eq(b,b)"),
    (9, 4, 2, "Exit", "eq(b,b)"),
    (10, 1, 1, "Exit", "goal"),
]


def assert_matches_table(events, table):
    from boxtrace.parser import parse_term_text

    assert len(events) == len(table)
    for event, (chrono, node, depth, port, goal) in zip(events, table):
        assert event.chrono == chrono
        assert event.node == node
        assert event.depth == depth
        assert event.port.value == port
        assert alpha_equal(event.goal, parse_term_text(goal))


def test_node_depth():
    assert node_depth(()) == 1
    assert node_depth((1,)) == 2
    assert node_depth((1, 1, 2)) == 4


def test_extract_choice_program(choice_program):
    trace = extract_trace(run(choice_program))
    assert_matches_table(trace.events, CHOICE_EVENTS)
    assert trace.initial_goal == Atom("goal")


def test_streamed_events_match_extracted(choice_program):
    result = run(choice_program)
    recorded = extract_trace(result).events
    eng = Engine(choice_program)
    streamed = [ev for _, ev, _ in stream_events(eng)]
    assert events_alpha_equal(streamed, recorded)
    # and the exact same objects' text forms line up
    assert [render_event(e) for e in streamed] == [render_event(e) for e in recorded]


def test_exactly_one_event_per_step(choice_program):
    result = run(choice_program)
    trace = extract_trace(result)
    assert len(trace.events) == len(result.trace.steps)


def test_exit_goal_is_instance_of_call_goal(choice_program):
    events = extract_trace(run(choice_program)).events
    calls = {}
    for event in events:
        if event.port is Port.CALL:
            calls[event.node] = event.goal
        elif event.port is Port.EXIT and event.node in calls:
            assert is_instance_of(event.goal, calls[event.node])


def test_call_depth_is_parent_depth_plus_one(choice_program):
    result = run(choice_program)
    events = extract_trace(result).events
    pre = result.trace.initial
    for event, record in zip(events, result.trace.steps):
        if event.port is Port.CALL and len(pre.current) > 0:
            assert event.depth == node_depth(pre.current[:-1]) + 1
        pre = record.state


def test_redo_subject_is_the_choice_point(choice_program):
    result = run(choice_program)
    pre = result.trace.initial
    for record in result.trace.steps:
        event = extract(record.rule, pre, record.state, record.chrono)
        if event.port is Port.REDO:
            assert event.node == pre.numbers[pre.greatest_choice_point()]
        pre = record.state


def test_trace_invariants_on_generated_programs():
    from boxtrace import GenParams, gen_program

    for seed in range(40):
        program = gen_program(GenParams(seed=seed, recursion_prob=0.05))
        result = run(program, max_steps=500)
        events = extract_trace(result).events
        assert len(events) == len(result.trace.steps)
        assert [e.chrono for e in events] == list(range(1, len(events) + 1))
        calls = {}
        pre = result.trace.initial
        for event, record in zip(events, result.trace.steps):
            if event.port is Port.CALL:
                calls[event.node] = event.goal
                if pre.current:
                    assert event.depth == node_depth(pre.current[:-1]) + 1
            elif event.port is Port.EXIT and event.node in calls:
                assert is_instance_of(event.goal, calls[event.node])
            pre = record.state


# -- text form ------------------------------------------------------------------


def test_render_event_format():
    e = TraceEvent(3, 2, 2, Port.EXIT, Compound("p", (Atom("a"),)))
    assert render_event(e) == "3 2 2 Exit p(a)"


def test_parse_event_round_trip():
    line = "5 3 2 Fail eq(a,b)"
    assert render_event(parse_event(line)) == line


def test_parse_event_errors():
    with pytest.raises(ParseError, match="unknown port"):
        parse_event("1 1 1 Jump x")
    with pytest.raises(ParseError, match="5 fields"):
        parse_event("1 1 Call x")
    with pytest.raises(ParseError, match="non-integer"):
        parse_event("one 1 1 Call x")
    with pytest.raises(ParseError, match="positive"):
        parse_event("0 1 1 Call x")


def test_parse_accepts_any_whitespace_runs():
    assert render_event(parse_event("  3   2  2   Exit   p(a) ")) == "3 2 2 Exit p(a)"


def test_trace_text_round_trip(choice_program):
    events = extract_trace(run(choice_program)).events
    text = write_trace_text(events)
    assert events_alpha_equal(parse_trace_text(text), events)
    assert text.splitlines()[0] == "1 1 1 Call goal"


def test_pretty_output_parses_back(choice_program):
    events = extract_trace(run(choice_program)).events
    lines = render_events_pretty(events)
    assert events_alpha_equal([parse_event(line) for line in lines], events)
    # aligned: all chrono columns right-justified to the same width
    assert lines[0].startswith(" 1 ")
    assert lines[-1].startswith("10 ")


def test_jsonl_round_trip(choice_program):
    events = extract_trace(run(choice_program)).events
    text = "\n".join(event_to_json(e) for e in events)
    assert events_alpha_equal(parse_trace_text(text, fmt="jsonl"), events)
    assert '"port": "Call"' in event_to_json(events[0])


def test_bad_jsonl():
    with pytest.raises(ParseError):
        event_from_json('{"chrono": 1}')


# -- event round-trip property ----------------------------------------------------

ports = st.sampled_from(list(Port))
goal_atoms = st.sampled_from([Atom("a"), Atom("b")])
goal_vars = st.builds(
    Variable,
    st.sampled_from(["X", "Y", "Longer"]),
    st.integers(min_value=0, max_value=9),
)
goals = st.recursive(
    goal_atoms | goal_vars,
    lambda sub: st.builds(
        lambda f, args: Compound(f, tuple(args)),
        st.sampled_from(["f", "eq"]),
        st.lists(sub, min_size=1, max_size=3),
    ),
    max_leaves=5,
)
events = st.builds(
    TraceEvent,
    st.integers(min_value=1, max_value=10**6),
    st.integers(min_value=1, max_value=10**6),
    st.integers(min_value=1, max_value=10**4),
    ports,
    goals,
)


@given(events)
def test_event_text_round_trip_identity(event):
    assert parse_event(render_event(event)) == event


@given(events)
def test_event_json_round_trip_identity(event):
    assert event_from_json(event_to_json(event)) == event
