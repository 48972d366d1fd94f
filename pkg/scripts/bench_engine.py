#!/usr/bin/env python3
"""Step-rate smoke benchmark.

Two workload shapes:
  * bounded-depth combinatorial backtracking (choice-point churn) --
    the shape that accidental quadratic tree bookkeeping would wreck;
  * a deep enumerator (tree depth grows with every solution).

The advisory floor is 1e5 steps/s on the backtracking workload; the script
reports, it does not fail.
"""

import sys
import time

sys.path.insert(0, "src")

from boxtrace import parse_program
from boxtrace.engine import Engine

BACKTRACKING = """
p(a). p(b). p(c). p(d).
g :- p(A), p(B), p(C), p(D), p(E), p(F), nope.
:- g.
"""

DEEP_ENUMERATOR = """
n(z).
n(s(X)) :- n(X).
:- n(X).
"""


def rate(text: str, cap: int) -> tuple[int, float]:
    eng = Engine(parse_program(text))
    started = time.perf_counter()
    steps = 0
    while steps < cap and eng.step() is not None:
        steps += 1
    return steps, steps / (time.perf_counter() - started)


def main() -> int:
    steps, per_sec = rate(BACKTRACKING, 200_000)
    flag = "ok" if per_sec >= 1e5 else "BELOW ADVISORY FLOOR"
    print(f"backtracking : {steps:>7} steps  {per_sec:>10,.0f} steps/s  [{flag}]")

    steps, per_sec = rate(DEEP_ENUMERATOR, 50_000)
    print(f"deep counter : {steps:>7} steps  {per_sec:>10,.0f} steps/s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
