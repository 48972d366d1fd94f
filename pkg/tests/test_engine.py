import pytest

from boxtrace import (
    ROOT,
    Compound,
    Engine,
    EngineError,
    RuleId,
    Variable,
    alpha_equal,
    dewey_less,
    new_sibling_path,
    parse_program,
    parent_path,
    paths_after,
    render_term,
    run,
)

X = Variable("X")


def names(rules):
    return [r.value for r in rules]


# -- Dewey path order and navigation -------------------------------------------


def test_dewey_order_examples():
    assert dewey_less((), (1,))  # root before everything
    assert dewey_less((1, 1), (1, 2))  # siblings by index
    assert not dewey_less((2,), (1, 1))  # (1,1) precedes (2,)
    assert dewey_less((1,), (1, 2))  # prefix before extension
    assert dewey_less((1, 1), (2,))


def test_parent_path():
    assert parent_path((1, 2)) == (1,)
    assert parent_path((2,)) == ()
    assert parent_path(()) == ()  # the root is its own parent


def test_new_sibling_path():
    assert new_sibling_path((1,)) == (2,)
    assert new_sibling_path((1, 1)) == (1, 2)
    with pytest.raises(EngineError):
        new_sibling_path(())


def test_paths_after():
    tree = {(), (1,), (1, 1), (2,)}
    assert sorted(paths_after(tree, (1,))) == [(1, 1), (2,)]
    assert paths_after(tree, (2,)) == []  # greatest node: nothing after


# -- the running example, step by step -----------------------------------------

CHOICE_RULES = [
    "Call2", "Call1", "Exit2", "Call1", "Fail2",
    "Redo1", "Exit2", "Call1", "Exit1", "Exit1",
]


def test_choice_program_rule_sequence(choice_program):
    result = run(choice_program)
    assert result.completed
    assert names(s.rule for s in result.trace.steps) == CHOICE_RULES
    assert [render_term(t) for t in result.answers] == ["goal"]


def test_first_step_creates_child_box(choice_program):
    result = run(choice_program)
    state = result.trace.steps[0].state
    assert state.tree == {(), (1,)}
    assert state.current == (1,)
    assert state.last_number == 2
    assert state.numbers == {(): 1, (1,): 2}
    assert alpha_equal(state.goals[(1,)], Compound("p", (X,)))
    # clauses of the new box: p(a) and p(b), in source order
    assert [cl.source_index for cl in state.clauses[(1,)]] == [1, 2]
    assert state.clauses[()] == ()
    assert state.fresh[(1,)] and not state.fresh[()]


def test_choice_point_tracking_after_failure(choice_program):
    eng = Engine(choice_program)
    for _ in range(5):  # through the Fail2 at eq(a,b)
        eng.step()
    assert eng.current == ROOT
    assert eng.failing
    assert eng.greatest_choice_point(ROOT) == (1,)
    assert [cl.source_index for cl in eng.clauses[(1,)]] == [2]


def test_redo_prunes_failed_sibling(choice_program):
    eng = Engine(choice_program)
    for _ in range(6):  # Redo1 applied
        eng.step()
    assert eng.tree == {(), (1,)}
    assert eng.current == (1,)
    assert eng.clauses[(1,)] == ()
    assert not eng.failing
    # the exited value is kept on the node until the next Exit overwrites it
    assert render_term(eng.goals[(1,)]) == "p(a)"


def test_recreated_sibling_gets_fresh_number(choice_program):
    result = run(choice_program)
    final = result.trace.steps[-1].state
    assert final.tree == {(), (1,), (2,)}
    assert final.numbers == {(): 1, (1,): 2, (2,): 4}
    assert render_term(final.goals[(1,)]) == "p(b)"
    assert render_term(final.goals[(2,)]) == "eq(b,b)"
    assert final.done and final.current == ()


def test_sibling_position_controls_exit_variant(choice_program):
    # p(X) sits before eq(X,b) in the clause body: its exit spawns a sibling;
    # eq's exit walks up; the root has no sibling.
    eng = Engine(choice_program)
    eng.step()
    eng.step()  # Call p(X)
    assert eng.has_next_body_goal((1,))
    assert not eng.has_next_body_goal(())
    for _ in range(6):
        eng.step()  # through Call eq(b,b)
    assert not eng.has_next_body_goal((2,))


# -- enumeration and degenerate programs ----------------------------------------


def test_two_facts_enumerates_both_answers(two_facts):
    result = run(two_facts)
    assert names(s.rule for s in result.trace.steps) == [
        "Call1", "Exit1", "Redo1", "Exit1",
    ]
    assert [render_term(t) for t in result.answers] == ["p(a)", "p(b)"]
    assert result.completed


def test_goal_with_no_matching_clause(no_match):
    result = run(no_match)
    assert names(s.rule for s in result.trace.steps) == ["Call1", "Fail2"]
    assert result.answers == ()
    final = result.trace.steps[-1].state
    assert final.done and final.failing and final.tree == {()}


def test_single_fact(single_fact):
    result = run(single_fact)
    assert names(s.rule for s in result.trace.steps) == ["Call1", "Exit1"]
    assert [render_term(t) for t in result.answers] == ["a"]


def test_rule_choice_point_uses_redo2():
    program = parse_program("p(a).\np(X) :- q(X).\nq(b).\n:- p(Z).")
    result = run(program)
    assert names(s.rule for s in result.trace.steps) == [
        "Call1", "Exit1", "Redo2", "Call1", "Exit1", "Exit1",
    ]
    assert [render_term(t) for t in result.answers] == ["p(a)", "p(b)"]


def test_deep_choice_point_jump():
    program = parse_program(
        "g :- p(X), q(X).\np(Y) :- r(Y).\nr(a).\nr(b).\nq(b).\n:- g."
    )
    result = run(program)
    assert [render_term(t) for t in result.answers] == ["g"]
    rules = names(s.rule for s in result.trace.steps)
    # the Redo jumps straight into the r box two levels down
    assert "Redo1" in rules
    redo_at = rules.index("Redo1")
    state = result.trace.steps[redo_at].state
    assert state.current == (1, 1)


def test_bindings_restored_across_redo(two_facts):
    # After Redo at the root box, X must be free again so p(b) can bind it.
    result = run(two_facts)
    exits = [s.state for s in result.trace.steps if s.rule is RuleId.EXIT1]
    assert render_term(exits[0].goals[()]) == "p(a)"
    assert render_term(exits[1].goals[()]) == "p(b)"


# -- limits ----------------------------------------------------------------------


def test_step_limit_returns_valid_prefix():
    looping = parse_program("loop :- loop.\n:- loop.")
    result = run(looping, max_steps=50)
    assert not result.completed
    assert result.stop_reason == "step-limit"
    assert len(result.trace.steps) == 50
    chronos = [s.chrono for s in result.trace.steps]
    assert chronos == list(range(1, 51))


def test_solution_limit(two_facts):
    result = run(two_facts, max_solutions=1)
    assert [render_term(t) for t in result.answers] == ["p(a)"]
    assert result.stop_reason == "solution-limit"


# -- invariants over whole runs ---------------------------------------------------


def assert_state_invariants(state):
    assert state.current in state.tree
    for mapping in (state.numbers, state.goals, state.clauses, state.fresh):
        assert set(mapping) == state.tree
    numbers = list(state.numbers.values())
    assert len(set(numbers)) == len(numbers)
    assert state.numbers[()] == 1
    assert state.last_number >= max(numbers)
    for v in state.tree:
        if v:
            assert parent_path(v) in state.tree
        if state.fresh[v]:
            assert not any(y[: len(v)] == v for y in state.tree if y != v)


@pytest.mark.parametrize(
    "text",
    [
        None,  # use the choice program fixture
        "p(a).\np(b).\n:- p(X).",
        "g :- p(X), q(X).\np(Y) :- r(Y).\nr(a).\nr(b).\nq(b).\n:- g.",
        "p(a).\n:- q(a).",
        "n(z).\nn(s(X)) :- n(X).\n:- n(X).",
    ],
)
def test_invariants_hold_along_runs(text, choice_program):
    program = choice_program if text is None else parse_program(text)
    result = run(program, max_steps=60)
    assert_state_invariants(result.trace.initial)
    previous_failing = result.trace.initial.failing
    for chrono, record in enumerate(result.trace.steps, start=1):
        assert record.chrono == chrono
        assert_state_invariants(record.state)
        if record.rule is RuleId.FAIL2:
            assert record.state.failing
        previous_failing = record.state.failing


def test_terminal_state_has_no_rule(choice_program):
    eng = Engine(choice_program)
    while eng.step() is not None:
        pass
    assert eng.select_rule() is None
    assert eng.done
