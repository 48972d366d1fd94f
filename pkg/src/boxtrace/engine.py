"""Resolution engine for the four-port box model.

Execution is a building-visit of a partial proof tree.  Nodes are addressed
by Dewey paths (tuples of child indices, `()` is the root); each node is a
box holding the called predication and its not-yet-tried clauses.  Exactly
one of seven transition rules applies at every non-terminal state:

    Call1  enter a leaf whose next clause is a fact (or that has no clause
           at all: the degenerate call of a failed box)
    Call2  enter a leaf with a rule clause; create the first body child
    Exit1  leave a solved node upward (last body goal of its parent)
    Exit2  leave a solved node sideways: create the next body sibling
    Fail2  step up from a failed subtree with no choice point left
    Redo1  jump back to the latest choice point; its next clause is a fact
    Redo2  same jump, next clause is a rule; create its first body child

The visible state per node is: Dewey tree, current node, creation counter
and per-node creation number, predication, untried clauses, and first-visit
flag, plus the global `done` and `failing` bits.  Unification lives behind
the scenes: bindings go into one mutable store with an undo trail, and each
clause consumption records a trail mark so a jump back to a choice point
restores the bindings it started from.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .terms import (
    Clause,
    Program,
    Subst,
    Term,
    Variable,
    functor_key,
    instantiate,
    rename_term,
    trial_heads,
    unify,
    unify_into,
)

class DeweyPath(tuple):
    """A node address: tuple of child indices, with the hash cached.

    Paths in deep proof trees get long, and the engine keys most of its
    per-node maps by path; caching the hash makes those lookups O(1) after
    the address is built once.  Interops freely with plain tuples.
    """

    def __hash__(self):
        try:
            return self._cached_hash
        except AttributeError:
            value = tuple.__hash__(self)
            self._cached_hash = value
            return value


_interned: dict[tuple, "DeweyPath"] = {}


def intern_path(coords: tuple[int, ...]) -> "DeweyPath":
    """One shared address object per coordinate sequence, so addresses
    built independently (engine vs. replay) compare by identity.

    The table is a plain cache: clearing it is always safe (comparisons
    fall back to tuple equality) and callers that pump many runs through
    one process clear it between runs.
    """
    path = _interned.get(coords)
    if path is None:
        if len(_interned) > 2_000_000:
            _interned.clear()
        path = DeweyPath(coords)
        _interned[coords] = path
    return path


def clear_path_cache() -> None:
    _interned.clear()


def child_of(parent: Path, index: int) -> "DeweyPath":
    """Interned child address, cached on the parent object so repeated
    (re)creation and independent replay hit the same object.  Children of
    the root go through the clearable module table instead: the root is
    immortal and must not pin whole trees."""
    if not parent:
        return intern_path((index,))
    try:
        kids = parent.__dict__.get("_kids")
    except AttributeError:
        # plain-tuple parent from a caller: fall back to the table
        return intern_path(parent + (index,))
    if kids is None:
        kids = {}
        parent._kids = kids
    child = kids.get(index)
    if child is None:
        child = DeweyPath(parent + (index,))
        kids[index] = child
    return child


Path = tuple[int, ...]
ROOT: Path = intern_path(())


class EngineError(Exception):
    """Internal invariant broken; indicates a bug, not bad input."""


class DeterminismError(EngineError):
    """More than one transition rule guard held at the same state."""


class RuleId(enum.Enum):
    CALL1 = "Call1"
    CALL2 = "Call2"
    EXIT1 = "Exit1"
    EXIT2 = "Exit2"
    FAIL2 = "Fail2"
    REDO1 = "Redo1"
    REDO2 = "Redo2"


REDO_RULES = (RuleId.REDO1, RuleId.REDO2)
EXIT_RULES = (RuleId.EXIT1, RuleId.EXIT2)
CALL_RULES = (RuleId.CALL1, RuleId.CALL2)


def dewey_less(a: Path, b: Path) -> bool:
    """Dewey order: a proper prefix precedes its extensions, and siblings
    order by child index.  This is exactly tuple comparison."""
    return a < b


def parent_path(v: Path) -> Path:
    """Drop the last coordinate; the root is its own parent."""
    return v[:-1] if v else ROOT


def new_sibling_path(v: Path) -> Path:
    """Increment the last coordinate.  The root has no sibling."""
    if not v:
        raise EngineError("the root has no sibling")
    return v[:-1] + (v[-1] + 1,)


def paths_after(paths, v: Path) -> list[Path]:
    """All members strictly greater than v in Dewey order (the part of the
    tree a jump back to v discards)."""
    return [y for y in paths if y > v]


def _clause_index(program: Program):
    """Head functor/arity -> [(clause, trial-renamed head)], source order."""
    index: dict[tuple[str, int], list[tuple[Clause, Term]]] = {}
    for clause, head in zip(program.clauses, trial_heads(program)):
        index.setdefault(functor_key(clause.head), []).append((clause, head))
    return index


@dataclass(frozen=True)
class VirtualState:
    """Immutable snapshot of the visible engine state after one step."""

    tree: frozenset[Path]
    current: Path
    last_number: int
    numbers: dict[Path, int]
    goals: dict[Path, Term]
    clauses: dict[Path, tuple[Clause, ...]]
    fresh: dict[Path, bool]
    done: bool
    failing: bool

    def greatest_choice_point(self) -> Optional[Path]:
        """Dewey-greatest node below (or at) `current` with untried clauses."""
        u = self.current
        best: Optional[Path] = None
        for p, cl in self.clauses.items():
            if cl and p[: len(u)] == u and (best is None or p > best):
                best = p
        return best


@dataclass(frozen=True)
class StepRecord:
    chrono: int
    rule: RuleId
    state: VirtualState


@dataclass(frozen=True)
class VirtualTrace:
    initial: VirtualState
    steps: tuple[StepRecord, ...]


@dataclass(frozen=True)
class StepDelta:
    """What one step changed in the visible tree-shaped state.

    `removed` lists discarded nodes, `created` a new node with its creation
    number and predication, `updated_goal` the solved node whose predication
    was overwritten on exit.  `current` is the node after the step.
    """

    current: Path
    removed: tuple[Path, ...] = ()
    created: Optional[Path] = None
    created_number: Optional[int] = None
    created_goal: Optional[Term] = None
    updated_goal: Optional[tuple[Path, Term]] = None


@dataclass(frozen=True)
class RunResult:
    trace: VirtualTrace
    answers: tuple[Term, ...]
    completed: bool
    stop_reason: str  # "terminal" | "step-limit" | "solution-limit"


class Engine:
    """Single sequential run of one program.  Not thread-safe; distinct
    instances are independent."""

    def __init__(self, program: Program):
        self.program = program
        self._index = _clause_index(program)
        goal = program.goal
        self.tree: set[Path] = {ROOT}
        self.current: Path = ROOT
        self.last_number = 1
        self.numbers: dict[Path, int] = {ROOT: 1}
        self.goals: dict[Path, Term] = {ROOT: goal}
        self.clauses: dict[Path, tuple[Clause, ...]] = {
            ROOT: self._matching_clauses(goal)
        }
        self.fresh: dict[Path, bool] = {ROOT: True}
        self.done = False
        self.failing = False
        self.chrono = 0
        self.answers: list[Term] = []
        # Bookkeeping hidden from the visible state: the substitution store,
        # per-node call-time predication (never overwritten), the clause
        # instance a node is currently running, and the trail mark each node
        # saw just before it last consumed a clause (the undo point).
        self.subst: Subst = {}
        self.trail: list[Variable] = []
        # Expansion cache for instantiating goals; valid only while the
        # substitution is untouched (version bumps on bind and undo).
        self._inst_memo: dict[Variable, Term] = {}
        self._subst_version = 0
        self._memo_version = -1
        self.rename_counter = 0
        self.call_goal: dict[Path, Term] = {ROOT: goal}
        self.active_clause: dict[Path, tuple[Clause, int]] = {}
        self.saved_mark: dict[Path, int] = {}
        self.child_count: dict[Path, int] = {ROOT: 0}
        self.parent_of: dict[Path, Path] = {ROOT: ROOT}
        # Creation-ordered mirrors of the tree and of the nodes with untried
        # clauses.  Nodes are always created past everything alive, so for
        # live nodes creation-number order and Dewey order coincide:
        # insertion appends, and a jump back to a choice point discards a
        # suffix.  Entries are (creation number, path).
        self._tree_order: list[tuple[int, Path]] = [(1, ROOT)]
        self._cp_order: list[tuple[int, Path]] = (
            [(1, ROOT)] if self.clauses[ROOT] else []
        )

    def _matching_clauses(self, goal: Term) -> tuple[Clause, ...]:
        """useful_clauses over an already-instantiated goal, sped up by the
        head-functor index (a head with another functor can never unify)."""
        kept = []
        for clause, head in self._index.get(functor_key(goal), ()):
            if unify(goal, head, {}) is not None:
                kept.append(clause)
        return tuple(kept)

    # -- predicates over the current state ---------------------------------

    def is_leaf(self, v: Path) -> bool:
        return self.child_count[v] == 0

    def next_clause_is_fact(self, v: Path) -> bool:
        cl = self.clauses[v]
        return bool(cl) and cl[0].is_fact

    def has_next_body_goal(self, v: Path) -> bool:
        """True iff v's goal is not the last one in its parent's running
        clause body, i.e. solving v must spawn a sibling."""
        if not v:
            return False
        return v[-1] < len(self.active_clause[self.parent_of[v]][0].body)

    def has_choice_point(self, v: Path) -> bool:
        # The current node's subtree holds the Dewey-greatest live node, so
        # the greatest choice point overall is in v's subtree or nowhere.
        # Membership is checked by climbing the choice point's parent chain
        # to v's depth (usually zero or a few hops).
        if not self._cp_order:
            return False
        node = self._cp_order[-1][1]
        k = len(v)
        if len(node) < k:
            return False
        parents = self.parent_of
        while len(node) > k:
            node = parents[node]
        return node is v or node == v

    def greatest_choice_point(self, v: Path) -> Path:
        if not self.has_choice_point(v):
            raise EngineError(f"no choice point below {v!r}")
        return self._cp_order[-1][1]

    def instantiated_goal(self, v: Path) -> Term:
        """The node's call-time predication under the current bindings."""
        return self._instantiate(self.call_goal[v])

    def _instantiate(self, term: Term) -> Term:
        if self._memo_version != self._subst_version:
            self._inst_memo.clear()
            self._memo_version = self._subst_version
        return instantiate(term, self.subst, self._inst_memo)

    # -- rule selection -----------------------------------------------------

    def select_rule(self) -> Optional[RuleId]:
        """The unique applicable rule, or None at a terminal state.

        Evaluates all seven guards and raises DeterminismError if more than
        one holds; the exclusivity claim is checked on every step.
        """
        u = self.current
        fresh = self.fresh[u]
        leaf = self.child_count[u] == 0
        cl = self.clauses[u]
        fact_next = bool(cl) and not cl[0].body
        done, failing = self.done, self.failing
        # A leaf solved its call iff it consumed a clause (consumption only
        # happens after its head unified); a non-leaf is only ever current
        # under not-failing right after its last child exited, which makes
        # its subtree a finished proof.  A leaf that never consumed and has
        # no clause is the box nothing can serve: the failure origin.
        consumed = u in self.active_clause
        failed_leaf = leaf and not cl and not consumed
        # hcp only decides the Fail2 and Redo guards, whose other conjuncts
        # are known first; skipping it elsewhere changes no guard's truth.
        if not fresh and (failed_leaf or failing or done):
            hcp = self.has_choice_point(u)
        else:
            hcp = False

        applicable = []
        # The empty-clause alternative on Call1 is the degenerate call of a
        # box no clause can serve; it is immediately followed by Fail2.
        if fresh and leaf and not done and (fact_next or not cl):
            applicable.append(RuleId.CALL1)
        if fresh and leaf and not done and cl and not fact_next:
            applicable.append(RuleId.CALL2)
        if not fresh and not done and not failing and (consumed if leaf else True):
            if u and u[-1] < len(self.active_clause[self.parent_of[u]][0].body):
                applicable.append(RuleId.EXIT2)
            else:
                applicable.append(RuleId.EXIT1)
        if not fresh and not done and not hcp and (failed_leaf or failing):
            applicable.append(RuleId.FAIL2)
        if not fresh and hcp and (failing or done):
            target = self._cp_order[-1][1]
            target_cl = self.clauses[target]
            if not target_cl[0].body:
                applicable.append(RuleId.REDO1)
            else:
                applicable.append(RuleId.REDO2)
        if len(applicable) > 1:
            raise DeterminismError(
                f"rules {[r.value for r in applicable]} all apply at chrono "
                f"{self.chrono + 1}"
            )
        if not applicable:
            if not (self.done and not self.has_choice_point(ROOT)):
                raise EngineError(f"stuck in a non-terminal state at {u!r}")
            return None
        return applicable[0]

    # -- state updates ------------------------------------------------------

    def _consume_clause(self, v: Path) -> Clause:
        """Pop the next untried clause at v and unify its renamed head with
        v's call predication.  Filtering guarantees this cannot fail."""
        cl = self.clauses[v]
        if not cl:
            raise EngineError(f"no clause left to consume at {v!r}")
        head_clause, rest = cl[0], cl[1:]
        self.clauses[v] = rest
        if not rest:
            # Consumption happens at the current node or at the greatest
            # choice point, both of which sit at the end of the order.
            if self._cp_order and self._cp_order[-1][1] == v:
                self._cp_order.pop()
            else:
                self._cp_order = [e for e in self._cp_order if e[1] != v]
        self.rename_counter += 1
        head = rename_term(head_clause.head, self.rename_counter)
        self.saved_mark[v] = len(self.trail)
        self._subst_version += 1
        if not unify_into(self.call_goal[v], head, self.subst, self.trail):
            raise EngineError(f"head of a filtered clause failed to unify at {v!r}")
        self.active_clause[v] = (head_clause, self.rename_counter)
        return head_clause

    def _create_child(self, parent: Path) -> tuple[Path, int, Term]:
        """Make the next child box of `parent`: number it, call the matching
        body goal under the current bindings, and fill it with the clauses
        that can serve the call."""
        index = self.child_count[parent] + 1
        v = child_of(parent, index)
        clause, instance = self.active_clause[parent]
        goal = self._instantiate(rename_term(clause.body[index - 1], instance))
        self.last_number += 1
        number = self.last_number
        self.tree.add(v)
        self._tree_order.append((number, v))
        self.numbers[v] = number
        self.goals[v] = goal
        self.call_goal[v] = goal
        cl = self._matching_clauses(goal)
        self.clauses[v] = cl
        if cl:
            self._cp_order.append((number, v))
        self.fresh[v] = True
        self.child_count[v] = 0
        self.child_count[parent] = index
        self.parent_of[v] = parent
        return v, number, goal

    def _prune_after(self, v: Path) -> tuple[Path, ...]:
        """Discard every node after v in Dewey order and undo the bindings
        made since v last consumed a clause.  v's stored predication is left
        as it was (its call-time value lives in the hidden bookkeeping)."""
        keep = self.numbers[v]
        removed_list = []
        while self._tree_order and self._tree_order[-1][0] > keep:
            removed_list.append(self._tree_order.pop()[1])
        while self._cp_order and self._cp_order[-1][0] > keep:
            self._cp_order.pop()
        removed_list.reverse()
        removed = tuple(removed_list)
        removed_set = set(removed)
        for y in removed:
            # A surviving parent keeps the children before its first removed
            # one; only such parents can lose children at all.
            p = self.parent_of[y]
            if p not in removed_set and self.child_count[p] >= y[-1]:
                self.child_count[p] = y[-1] - 1
            self.tree.discard(y)
            del self.numbers[y]
            del self.goals[y]
            del self.clauses[y]
            del self.fresh[y]
            del self.child_count[y]
            self.call_goal.pop(y, None)
            self.active_clause.pop(y, None)
            self.saved_mark.pop(y, None)
            del self.parent_of[y]
        mark = self.saved_mark[v]
        self._subst_version += 1
        for var in self.trail[mark:]:
            del self.subst[var]
        del self.trail[mark:]
        return removed

    def apply_rule(self, rule: RuleId) -> StepDelta:
        """Apply `rule` (which select_rule just returned) and report what
        changed in the visible tree-shaped state."""
        u = self.current
        self.chrono += 1
        if rule is RuleId.CALL1:
            if self.clauses[u]:
                self._consume_clause(u)
            self.fresh[u] = False
            self.failing = False
            return StepDelta(current=u)
        if rule is RuleId.CALL2:
            self._consume_clause(u)
            self.fresh[u] = False
            self.failing = False
            v, number, goal = self._create_child(u)
            self.current = v
            return StepDelta(
                current=v, created=v, created_number=number, created_goal=goal
            )
        if rule is RuleId.EXIT1:
            solved = self.instantiated_goal(u)
            self.goals[u] = solved
            self.current = self.parent_of[u]
            if u == ROOT:
                self.done = True
                self.answers.append(solved)
            return StepDelta(current=self.current, updated_goal=(u, solved))
        if rule is RuleId.EXIT2:
            solved = self.instantiated_goal(u)
            self.goals[u] = solved
            created, number, goal = self._create_child(self.parent_of[u])
            if created[-1] != u[-1] + 1:
                raise EngineError(f"sibling mismatch: {created!r} after {u!r}")
            self.current = created
            return StepDelta(
                current=created,
                created=created,
                created_number=number,
                created_goal=goal,
                updated_goal=(u, solved),
            )
        if rule is RuleId.FAIL2:
            self.current = self.parent_of[u]
            if u == ROOT:
                self.done = True
            self.failing = True
            return StepDelta(current=self.current)
        if rule is RuleId.REDO1:
            v = self.greatest_choice_point(u)
            removed = self._prune_after(v)
            self._consume_clause(v)
            self.current = v
            self.done = False
            self.failing = False
            return StepDelta(current=v, removed=removed)
        if rule is RuleId.REDO2:
            v = self.greatest_choice_point(u)
            removed = self._prune_after(v)
            self._consume_clause(v)
            w, number, goal = self._create_child(v)
            self.current = w
            self.done = False
            self.failing = False
            return StepDelta(
                current=w,
                removed=removed,
                created=w,
                created_number=number,
                created_goal=goal,
            )
        raise EngineError(f"unknown rule {rule!r}")

    def step(self) -> Optional[tuple[RuleId, StepDelta]]:
        rule = self.select_rule()
        if rule is None:
            return None
        return rule, self.apply_rule(rule)

    def snapshot(self) -> VirtualState:
        return VirtualState(
            tree=frozenset(self.tree),
            current=self.current,
            last_number=self.last_number,
            numbers=dict(self.numbers),
            goals=dict(self.goals),
            clauses=dict(self.clauses),
            fresh=dict(self.fresh),
            done=self.done,
            failing=self.failing,
        )


def run(
    program: Program,
    max_steps: int = 100_000,
    max_solutions: Optional[int] = None,
) -> RunResult:
    """Run to completion (all solutions), keeping a snapshot per step.

    Enumeration continues past each success as long as a choice point
    remains.  Hitting a limit still returns a valid trace prefix.  For
    runs too long to snapshot, drive an Engine directly.
    """
    eng = Engine(program)
    initial = eng.snapshot()
    records: list[StepRecord] = []
    stop_reason = "step-limit"
    while len(records) < max_steps:
        stepped = eng.step()
        if stepped is None:
            stop_reason = "terminal"
            break
        rule, _ = stepped
        records.append(StepRecord(eng.chrono, rule, eng.snapshot()))
        if max_solutions is not None and len(eng.answers) >= max_solutions:
            stop_reason = "solution-limit"
            break
    return RunResult(
        trace=VirtualTrace(initial, tuple(records)),
        answers=tuple(eng.answers),
        completed=stop_reason == "terminal",
        stop_reason=stop_reason,
    )

