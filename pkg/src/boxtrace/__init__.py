"""boxtrace: a tracing pure-Prolog interpreter built around the classic
four-port box model, with trace extraction, trace replay, and a
faithfulness checker tying the two together."""

from .engine import (
    ROOT,
    DeterminismError,
    Engine,
    EngineError,
    Path,
    RuleId,
    RunResult,
    StepDelta,
    StepRecord,
    VirtualState,
    VirtualTrace,
    dewey_less,
    new_sibling_path,
    parent_path,
    paths_after,
    run,
)
from .harness import (
    FaithfulnessReport,
    GenParams,
    RefResult,
    check_faithfulness,
    gen_program,
    multiset_alpha_equal,
    reference_solve,
)
from .parser import ParseError, parse_program, parse_term_text
from .rebuild import (
    CorruptTraceError,
    Lookahead,
    Rebuilder,
    RebuildResult,
    RestrictedState,
    TraceTruncatedError,
    apply_event,
    classify,
    initial_state_for,
    lint_depths,
    nd,
    rebuild,
    rebuild_stream,
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
    is_instance_of,
    render_clause,
    render_program,
    render_term,
    rename_apart,
    unify,
    useful_clauses,
)
from .trace import (
    ActualTrace,
    Port,
    TraceEvent,
    event_from_json,
    event_to_json,
    events_alpha_equal,
    extract,
    extract_trace,
    node_depth,
    parse_event,
    parse_trace_text,
    render_event,
    stream_events,
    trace_program,
    write_trace_text,
)

__version__ = "0.1.0"
