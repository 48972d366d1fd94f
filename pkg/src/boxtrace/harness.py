"""Differential checking: engine -> events -> replay, against each other
and against an independent resolution oracle.

`check_faithfulness` runs the engine, extracts its event stream, replays
the stream, and asserts per step that the replayed state equals the engine
state restricted to {tree, current node, numbers, predications} and that
the classified rule equals the applied one.  The per-step comparison works
on step deltas (with periodic and final whole-state comparisons), so long
capped runs stay affordable.  Answers are additionally compared against
`reference_solve`, a plain recursive resolution search that shares nothing
with the engine beyond terms and unification.

`gen_program` produces small random programs in the supported subset,
deterministically from a seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional

from .engine import (
    DeterminismError,
    Engine,
    EngineError,
    RuleId,
    StepDelta,
    clear_path_cache,
)
from .rebuild import (
    CorruptTraceError,
    Rebuilder,
    RestrictedState,
    TraceTruncatedError,
)
from .terms import (
    Atom,
    Clause,
    Compound,
    Program,
    Subst,
    Term,
    Variable,
    alpha_equal,
    apply_subst,
    render_program,
    rename_apart,
    unify,
)
from .trace import TraceEvent, stream_events


# -- independent resolution oracle -------------------------------------------


class _CapExceeded(Exception):
    pass


@dataclass(frozen=True)
class RefResult:
    answers: tuple[Term, ...]
    capped: bool


def reference_solve(
    program: Program, max_depth: int = 250, max_steps: int = 200_000
) -> RefResult:
    """Answers of a direct recursive search: leftmost goal, textual clause
    order, depth-first.  Deliberately not built on the engine; when a cap
    is hit the answers found so far are a lower bound only.
    """
    answers: list[Term] = []
    counters = {"steps": 0, "rename": 0}

    def solve(goals: tuple[Term, ...], s: Subst, depth: int):
        if not goals:
            answers.append(apply_subst(program.goal, s))
            return
        if depth > max_depth:
            raise _CapExceeded
        first, rest = goals[0], goals[1:]
        for clause in program.clauses:
            counters["steps"] += 1
            if counters["steps"] > max_steps:
                raise _CapExceeded
            counters["rename"] += 1
            instance = rename_apart(clause, counters["rename"])
            extended = unify(first, instance.head, s)
            if extended is not None:
                solve(instance.body + rest, extended, depth + 1)

    try:
        solve((program.goal,), {}, 0)
    except _CapExceeded:
        return RefResult(tuple(answers), capped=True)
    return RefResult(tuple(answers), capped=False)


def multiset_alpha_equal(xs, ys) -> bool:
    """Multiset equality over terms, each pair compared up to renaming."""
    pool = list(ys)
    if len(xs) != len(pool):
        return False
    for x in xs:
        for i, y in enumerate(pool):
            if alpha_equal(x, y):
                del pool[i]
                break
        else:
            return False
    return True


# -- random program generation ------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    seed: int
    predicate_count: int = 4
    max_clauses: int = 3
    max_body_len: int = 3
    max_term_depth: int = 2
    constant_pool: int = 3
    recursion_prob: float = 0.15

    def __post_init__(self):
        if min(
            self.predicate_count,
            self.max_clauses,
            self.max_body_len,
            self.max_term_depth,
            self.constant_pool,
        ) < 1:
            raise ValueError("all size bounds must be >= 1")
        if not 0.0 <= self.recursion_prob <= 1.0:
            raise ValueError("recursion_prob must be in [0, 1]")


_VAR_NAMES = ("X", "Y", "Z")


def gen_program(gp: GenParams) -> Program:
    """A syntactically valid random program, deterministic in the seed.

    With recursion_prob 0 every body goal calls a strictly later predicate
    (or one with no clauses), so the call graph is acyclic.
    """
    rng = random.Random(gp.seed)
    consts = [chr(ord("a") + i) if i < 26 else f"c{i}" for i in range(gp.constant_pool)]
    arities = [rng.randint(0, 2) for _ in range(gp.predicate_count)]

    def make_term(depth: int) -> Term:
        roll = rng.random()
        if roll < 0.35:
            return Atom(rng.choice(consts))
        if roll < 0.7 or depth <= 0:
            return Variable(rng.choice(_VAR_NAMES))
        functor = rng.choice(("f", "g"))
        arity = 1 if functor == "f" else 2
        return Compound(functor, tuple(make_term(depth - 1) for _ in range(arity)))

    def predication(idx: int, max_depth: int) -> Term:
        name = f"p{idx}"
        arity = arities[idx]
        if arity == 0:
            return Atom(name)
        args = tuple(make_term(rng.randint(0, max_depth)) for _ in range(arity))
        return Compound(name, args)

    clauses: list[Clause] = []
    for idx in range(gp.predicate_count):
        n_clauses = rng.randint(1, gp.max_clauses)
        for _ in range(n_clauses):
            head = predication(idx, gp.max_term_depth - 1)
            body_len = rng.randint(0, gp.max_body_len)
            body = []
            for _ in range(body_len):
                if rng.random() < 0.08:
                    # A call nothing defines: a guaranteed failure box.
                    body.append(Atom(f"missing{rng.randint(0, 1)}"))
                    continue
                if rng.random() < gp.recursion_prob:
                    # Possibly-cyclic call.  Arguments stay flat so a
                    # non-terminating descent cannot also grow its terms
                    # without bound (capped runs stay desk-affordable).
                    callee = rng.randint(0, gp.predicate_count - 1)
                    body.append(predication(callee, 0))
                elif idx + 1 < gp.predicate_count:
                    # Acyclic call: structure in the arguments is safe.
                    callee = rng.randint(idx + 1, gp.predicate_count - 1)
                    body.append(predication(callee, 1))
                else:
                    body.append(Atom(f"missing{rng.randint(0, 1)}"))
            clauses.append(Clause(head, tuple(body), len(clauses)))
    goal = predication(0, 1)
    return Program(tuple(clauses), goal)


# -- the faithfulness check ----------------------------------------------------


@dataclass
class Divergence:
    chrono: int
    note: str
    applied_rule: Optional[RuleId] = None
    classified_rule: Optional[RuleId] = None
    engine_state: Optional[RestrictedState] = None
    rebuilt_state: Optional[RestrictedState] = None


@dataclass
class FaithfulnessReport:
    program_digest: str
    steps_checked: int
    verdict: str  # "pass" | "fail" | "limit-hit"
    first_divergence: Optional[Divergence] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def program_digest(program: Program) -> str:
    return hashlib.sha256(render_program(program).encode()).hexdigest()[:12]


def _apply_delta(state: RestrictedState, delta: StepDelta) -> None:
    for y in delta.removed:
        state.tree.discard(y)
        state.numbers.pop(y, None)
        state.goals.pop(y, None)
    if delta.updated_goal is not None:
        path, goal = delta.updated_goal
        state.goals[path] = goal
    if delta.created is not None:
        state.tree.add(delta.created)
        state.numbers[delta.created] = delta.created_number
        state.goals[delta.created] = delta.created_goal
    state.current = delta.current


def _same_path(x, y) -> bool:
    # Paths are interned, so identity is the common case; fall back to
    # value equality for paths built before a cache clear.
    return x is y or x == y


def _deltas_match(a: StepDelta, b: StepDelta) -> bool:
    if not _same_path(a.current, b.current):
        return False
    if len(a.removed) != len(b.removed):
        return False
    # Both sides report removals in ascending Dewey order.
    for x, y in zip(a.removed, b.removed):
        if not _same_path(x, y):
            return False
    if a.created_number != b.created_number:
        return False
    if (a.created is None) != (b.created is None):
        return False
    if a.created is not None and not _same_path(a.created, b.created):
        return False
    if (a.created_goal is None) != (b.created_goal is None):
        return False
    if a.created_goal is not None and not alpha_equal(a.created_goal, b.created_goal):
        return False
    if (a.updated_goal is None) != (b.updated_goal is None):
        return False
    if a.updated_goal is not None:
        if not _same_path(a.updated_goal[0], b.updated_goal[0]):
            return False
        if not alpha_equal(a.updated_goal[1], b.updated_goal[1]):
            return False
    return True


def check_faithfulness(
    program: Program,
    max_steps: int = 10_000,
    full_compare_every: int = 8192,
    reference_caps: tuple[int, int] = (250, 200_000),
) -> FaithfulnessReport:
    """Run, extract, replay, and compare step by step; then cross-check the
    answer multiset against the oracle when nothing hit a cap.

    Comparison per step: applied vs classified rule, then the step deltas
    on {tree, current, numbers, predications}; whole restricted states are
    compared at the start, every `full_compare_every` steps, and at the
    end, which together pin equality at every step.
    """
    digest = program_digest(program)
    clear_path_cache()
    eng = Engine(program)
    reb = Rebuilder(RestrictedState.initial(program.goal))
    mirror = RestrictedState.initial(program.goal)

    engine_steps: list[tuple[RuleId, StepDelta, TraceEvent]] = []
    divergence: Optional[Divergence] = None
    checked = 0
    completed = True

    def compare_one(
        idx: int, applied: RuleId, eng_delta: StepDelta, rebuilt
    ) -> Optional[Divergence]:
        classified, reb_delta = rebuilt
        chrono = idx + 1
        if classified is not applied:
            return Divergence(
                chrono,
                "classified rule differs from applied rule",
                applied_rule=applied,
                classified_rule=classified,
            )
        _apply_delta(mirror, eng_delta)
        if (
            len(mirror.tree) != len(reb.state.tree)
            or len(mirror.numbers) != len(reb.state.numbers)
            or len(mirror.goals) != len(reb.state.goals)
        ):
            return Divergence(
                chrono,
                "replayed tree size differs from the engine's",
                applied_rule=applied,
                classified_rule=classified,
            )
        if not _deltas_match(eng_delta, reb_delta):
            return Divergence(
                chrono,
                "state change differs between engine and replay",
                applied_rule=applied,
                classified_rule=classified,
                engine_state=mirror.copy(),
                rebuilt_state=reb.state.copy(),
            )
        if chrono == 1 or chrono % full_compare_every == 0:
            if not mirror.matches(reb.state):
                return Divergence(
                    chrono,
                    "restricted states diverged",
                    applied_rule=applied,
                    classified_rule=classified,
                    engine_state=mirror.copy(),
                    rebuilt_state=reb.state.copy(),
                )
        return None

    try:
        for rule, event, delta in stream_events(eng, max_steps=max_steps):
            engine_steps.append((rule, delta, event))
            done = reb.push(event)
            if done is not None:
                idx = len(engine_steps) - 2
                applied, eng_delta, _ = engine_steps[idx]
                divergence = compare_one(idx, applied, eng_delta, done)
                checked += 1
                if divergence:
                    break
        else:
            completed = eng.select_rule() is None
    except (DeterminismError, EngineError) as err:
        return FaithfulnessReport(digest, checked, "fail", detail=str(err))
    except (TraceTruncatedError, CorruptTraceError) as err:
        divergence = Divergence(err.chrono, f"replay rejected the stream: {err}")

    if divergence is None and engine_steps and completed:
        # The final event only classifies without lookahead on a completed
        # run; capped runs stop comparing one event early.
        try:
            done = reb.finish()
        except (TraceTruncatedError, CorruptTraceError) as err:
            done = None
            divergence = Divergence(err.chrono, f"replay rejected the stream: {err}")
        if done is not None:
            idx = len(engine_steps) - 1
            applied, eng_delta, _ = engine_steps[idx]
            divergence = compare_one(idx, applied, eng_delta, done)
            checked += 1
            if divergence is None and not mirror.matches(reb.state):
                divergence = Divergence(
                    len(engine_steps),
                    "final restricted states diverged",
                    engine_state=mirror.copy(),
                    rebuilt_state=reb.state.copy(),
                )

    if divergence is not None:
        return FaithfulnessReport(digest, checked, "fail", first_divergence=divergence)

    if not completed and not mirror.matches(reb.state):
        divergence = Divergence(
            checked,
            "restricted states diverged at the checked prefix's end",
            engine_state=mirror.copy(),
            rebuilt_state=reb.state.copy(),
        )
        return FaithfulnessReport(digest, checked, "fail", first_divergence=divergence)

    detail = ""
    if completed:
        ref = reference_solve(program, *reference_caps)
        if ref.capped:
            detail = "oracle hit its cap; answers not compared"
        elif not multiset_alpha_equal(eng.answers, ref.answers):
            return FaithfulnessReport(
                digest,
                checked,
                "fail",
                detail=(
                    "answer multisets differ: engine "
                    f"{len(eng.answers)} vs oracle {len(ref.answers)}"
                ),
            )
        return FaithfulnessReport(digest, checked, "pass", detail=detail)
    return FaithfulnessReport(
        digest, checked, "limit-hit", detail="step cap hit; prefix checked only"
    )


def compare_events_to_run(
    program: Program, events: list[TraceEvent], max_steps: int = 10_000
) -> FaithfulnessReport:
    """Replay an arbitrary event list against a fresh engine run of the
    program — the hook negative controls use to feed mutated streams."""
    digest = program_digest(program)
    eng = Engine(program)
    reb = Rebuilder(RestrictedState.initial(program.goal))
    mirror = RestrictedState.initial(program.goal)
    engine_steps = [(rule, delta) for rule, _, delta in stream_events(eng, max_steps)]

    checked = 0
    try:
        pushed = []
        for event in events:
            done = reb.push(event)
            if done is not None:
                pushed.append(done)
        done = reb.finish()
        if done is not None:
            pushed.append(done)
    except (TraceTruncatedError, CorruptTraceError) as err:
        return FaithfulnessReport(
            digest,
            checked,
            "fail",
            first_divergence=Divergence(err.chrono, f"replay rejected the stream: {err}"),
        )
    if len(pushed) != len(engine_steps):
        return FaithfulnessReport(
            digest,
            checked,
            "fail",
            first_divergence=Divergence(
                min(len(pushed), len(engine_steps)) + 1,
                f"{len(pushed)} replayed steps vs {len(engine_steps)} engine steps",
            ),
        )
    for idx, ((applied, eng_delta), (classified, reb_delta)) in enumerate(
        zip(engine_steps, pushed)
    ):
        chrono = idx + 1
        _apply_delta(mirror, eng_delta)
        if classified is not applied:
            return FaithfulnessReport(
                digest,
                checked,
                "fail",
                first_divergence=Divergence(
                    chrono,
                    "classified rule differs from applied rule",
                    applied_rule=applied,
                    classified_rule=classified,
                ),
            )
        if not _deltas_match(eng_delta, reb_delta):
            return FaithfulnessReport(
                digest,
                checked,
                "fail",
                first_divergence=Divergence(
                    chrono,
                    "state change differs between engine and replay",
                    engine_state=mirror.copy(),
                    rebuilt_state=reb.state.copy(),
                ),
            )
        checked += 1
    if not mirror.matches(reb.state):
        return FaithfulnessReport(
            digest,
            checked,
            "fail",
            first_divergence=Divergence(
                checked, "final restricted states diverged"
            ),
        )
    return FaithfulnessReport(digest, checked, "pass")
