import pytest

from boxtrace import parse_program

# The running example everywhere: one backtrack through a two-clause
# predicate, with one failing and one succeeding continuation.
CHOICE_PROGRAM = """\
goal :- p(X), eq(X,b).
p(a).
p(b).
eq(X,X).

:- goal.
"""

TWO_FACTS = "p(a).\np(b).\n:- p(X).\n"
NO_MATCH = "p(a).\n:- q(a).\n"
SINGLE_FACT = "a.\n:- a.\n"


@pytest.fixture
def choice_program():
    return parse_program(CHOICE_PROGRAM)


@pytest.fixture
def two_facts():
    return parse_program(TWO_FACTS)


@pytest.fixture
def no_match():
    return parse_program(NO_MATCH)


@pytest.fixture
def single_fact():
    return parse_program(SINGLE_FACT)
