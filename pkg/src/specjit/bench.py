"""Small timing helpers for the relative-performance checks."""

from __future__ import annotations

import statistics
import time

from specjit.frontend import load
from specjit.graph.optimize import strip_asserts
from specjit.orchestrator import Runtime


def time_calls(source: str, fn: str, args, *, calls: int = 20, warmup: int = 3, **kwargs) -> list[float]:
    """Per-call wall times of ``fn(*args)`` after ``warmup`` untimed calls.

    ``args`` is either a fixed argument list or a callable ``i -> list`` so
    that callers can keep arguments from being constant-folded.
    """
    argf = args if callable(args) else (lambda i: args)
    rt = Runtime(load(source), warmup=warmup, **kwargs)
    try:
        rt.run()
        for i in range(warmup + 1):
            rt.call(fn, *argf(i))
        times = []
        for i in range(calls):
            a = argf(warmup + 1 + i)
            t0 = time.perf_counter()
            rt.call(fn, *a)
            times.append(time.perf_counter() - t0)
    finally:
        rt.close()
    return times


def compiled_graph(source: str, fn: str, args, warmup: int = 3, **kwargs):
    """Warm ``fn`` up and return (runtime, graph) for its active cache entry."""
    argf = args if callable(args) else (lambda i: args)
    rt = Runtime(load(source), warmup=warmup, **kwargs)
    rt.run()
    for i in range(warmup + 1):
        rt.call(fn, *argf(i))
    fs = rt.function_state(fn)
    entries = fs.active() if fs else []
    return rt, (entries[0].graph if entries else None)


def time_graph(rt: Runtime, g, args, calls: int = 20) -> list[float]:
    """Run a graph directly through the runtime's executor."""
    argf = args if callable(args) else (lambda i: args)
    times = []
    for i in range(calls):
        a = list(argf(i))
        out: list[str] = []
        t0 = time.perf_counter()
        rt.executor.execute(g, a, rt.heap, out)
        times.append(time.perf_counter() - t0)
    return times


def assert_overhead(source: str, fn: str, args, calls: int = 30, rounds: int = 5) -> float:
    """Relative wall-time difference between a graph and its assert-free copy.

    Calls alternate between the two graphs so drift hits both equally.
    """
    argf = args if callable(args) else (lambda i: args)
    rt, g = compiled_graph(source, fn, args)
    try:
        bare = strip_asserts(g)
        with_a, without = [], []
        for r in range(rounds):
            ta, tb = [], []
            for i in range(calls):
                pair = ((g, ta), (bare, tb)) if (r + i) % 2 else ((bare, tb), (g, ta))
                for graph, acc in pair:
                    a = list(argf(i))
                    t0 = time.perf_counter()
                    rt.executor.execute(graph, a, rt.heap, [])
                    acc.append(time.perf_counter() - t0)
            with_a.append(statistics.median(ta))
            without.append(statistics.median(tb))
    finally:
        rt.close()
    a, b = min(with_a), min(without)
    return abs(a - b) / b


def median(xs) -> float:
    return statistics.median(xs)


__all__ = ["assert_overhead", "compiled_graph", "median", "time_calls", "time_graph"]
