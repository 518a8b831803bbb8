"""Run a program under the interpreter and under the dispatcher and compare.

The observable outcome of a run is its printed transcript, the final heap
(in a run-independent encoding) and the runtime error it stopped with, if
any.
"""

from __future__ import annotations

from dataclasses import dataclass

from specjit.errors import SLError
from specjit.frontend import load
from specjit.orchestrator import IMPERATIVE, SPECULATIVE, Runtime


@dataclass
class Outcome:
    output: str
    heap: object
    error: tuple | None
    stats: dict | None = None

    def same_as(self, other: "Outcome") -> bool:
        return (self.output, self.heap, self.error) == (other.output, other.heap, other.error)


def run_outcome(source: str, mode: str = SPECULATIVE, **kwargs) -> Outcome:
    program = load(source)
    rt = Runtime(program, mode=mode, **kwargs)
    err = None
    try:
        rt.run()
    except SLError as e:
        err = (type(e).__name__, getattr(e, "kind", None), str(e))
    finally:
        rt.close()
    stats = rt.stats() if mode != IMPERATIVE else None
    return Outcome(rt.output, rt.heap.snapshot(portable=True), err, stats)


def compare(source: str, **kwargs) -> tuple[bool, Outcome, Outcome]:
    """Oracle check: imperative run against a speculative run."""
    ref = run_outcome(source, IMPERATIVE)
    got = run_outcome(source, SPECULATIVE, **kwargs)
    return ref.same_as(got), ref, got


__all__ = ["Outcome", "compare", "run_outcome"]
