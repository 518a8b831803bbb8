"""Routes function calls between the interpreter and cached graphs.

Every user-function call made by the interpreter goes through
:meth:`Runtime._on_call`. A call whose arguments match an active cache entry
runs that entry's graph; anything else (warmup, cache miss, aborted graph)
is interpreted with profiling on, after which a graph is generated if the
function has been profiled enough and no entry covers the arguments.
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field

from specjit.assumptions import (
    KIND, TENSOR, TOP, TOP_SPEC, VALUE, Assumption, AssumptionSet, join, join_all, kind_spec,
    matches, relax, shape_spec, specificity,
)
from specjit.errors import GraphOnlyViolation, Unconvertible
from specjit.frontend import ast as A
from specjit.graph.execute import DEPTH_MARGIN, MAX_INVOKE_DEPTH, Aborted, Executor
from specjit.graph.gen import GenOptions, direct_functions, generate
from specjit.graph.optimize import optimize
from specjit.profiler import ProfileRecord, summarize
from specjit.runtime.interpreter import Interpreter
from specjit.runtime.values import FnRef, Heap, kind_of

SPECULATIVE, IMPERATIVE, GRAPH_ONLY = "speculative", "imperative", "graph-only"
MODES = (SPECULATIVE, IMPERATIVE, GRAPH_ONLY)

PROFILING, COMPILED, UNCONVERTIBLE = "Profiling", "Compiled", "Unconvertible"
ACTIVE, RETIRED, EVICTED = "Active", "Retired", "Evicted"

CONTROL_CATEGORIES = ("branch", "trip_count", "callee")
FAIL_THRESHOLD = 2


@dataclass
class CacheEntry:
    fn_id: int
    key: tuple
    graph: object
    assumptions: AssumptionSet
    nodes_before: int = 0
    nodes_after: int = 0
    hits: int = 0
    last_hit: int = 0
    errors: int = 0
    fails: Counter = field(default_factory=Counter)
    state: str = ACTIVE

    def matches(self, args) -> bool:
        for spec, a in zip(self.key, args):
            if not matches(spec, a):
                return False
        return True

    @property
    def specificity(self) -> int:
        return sum(specificity(s) for s in self.key)

    def to_json(self) -> dict:
        return {
            "graph": self.graph.id,
            "dispatch_key": [s.text() for s in self.key],
            "hits": self.hits,
            "nodes_before_optimize": self.nodes_before,
            "nodes_after_optimize": self.nodes_after,
            "state": self.state,
            "assumptions": [a.render(self._fail_count(a)) for a in self.assumptions],
        }

    def _fail_count(self, a: Assumption) -> int:
        return self.fails.get((a.site, a.category), 0)


@dataclass
class FunctionState:
    fn: A.FnDef
    mode: str = PROFILING
    reason: str = ""
    calls: int = 0
    graph_calls: int = 0
    interpreted_calls: int = 0
    entries: list = field(default_factory=list)
    overrides: dict = field(default_factory=dict)
    aborts: Counter = field(default_factory=Counter)
    graph_time: float = 0.0
    interp_time: float = 0.0
    generations: int = 0

    def active(self):
        return [e for e in self.entries if e.state == ACTIVE]

    def lookup(self, args) -> CacheEntry | None:
        for e in self.entries:
            if e.state == ACTIVE and e.matches(args):
                return e
        return None

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "reason": self.reason,
            "calls": self.calls,
            "graph_calls": self.graph_calls,
            "interpreted_calls": self.interpreted_calls,
            "cache_entries": len(self.active()),
            "entries": [e.to_json() for e in self.entries],
            "aborts": dict(sorted(self.aborts.items())),
            "generations": self.generations,
            "time_graph_s": round(self.graph_time, 6),
            "time_interpreted_s": round(self.interp_time, 6),
        }


class Runtime:
    """One program plus its heap, profile, graph cache and executor."""

    def __init__(self, program: A.Program, *, mode: str = SPECULATIVE, warmup: int = 3,
                 workers: int = 1, unroll: bool = True, specialize: bool = True,
                 cache_max: int | None = None, audit: bool = False):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode}")
        if warmup < 1:
            raise ValueError("warmup must be at least 1")
        if cache_max is not None and cache_max < 1:
            raise ValueError("cache_max must be positive")
        self.program = program
        self.mode = mode
        self.warmup = warmup
        self.options = GenOptions(unroll=unroll, specialize=specialize)
        self.cache_max = cache_max
        self.heap = Heap()
        self.out: list[str] = []
        self.profile = ProfileRecord()
        self.executor = Executor(workers=workers, audit=audit)
        hook = None if mode == IMPERATIVE else self._on_call
        self.interp = Interpreter(program, self.heap, self.out, sink=None, call_hook=hook)
        self.functions: dict[int, FunctionState] = {}
        self._tick = 0
        # calls are serialized per runtime; stats() reads under the same lock
        self._lock = threading.RLock()
        self._directs = direct_functions(program)

    # -- public API -----------------------------------------------------------------

    def run(self) -> str:
        """Execute the program's top-level statements; returns the transcript."""
        self.interp.run_program()
        return self.output

    @property
    def output(self) -> str:
        return "".join(self.out)

    def call(self, name: str, *args):
        """Call a global function by name through the dispatcher."""
        fnref = self.heap.globals.get(name)
        return self.interp.call_value(fnref, list(args))

    def close(self):
        self.executor.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def function_state(self, name: str) -> FunctionState | None:
        for fs in self.functions.values():
            if fs.fn.name == name:
                return fs
        return None

    # -- dispatch ----------------------------------------------------------------------

    def _state(self, fn: A.FnDef) -> FunctionState:
        fs = self.functions.get(fn.site)
        if fs is None:
            fs = self.functions[fn.site] = FunctionState(fn)
            if fn.captures:
                fs.mode, fs.reason = UNCONVERTIBLE, "captures enclosing variables"
        return fs

    def _on_call(self, fnref: FnRef, args: list):
        with self._lock:
            return self._dispatch(fnref, args)

    def _dispatch(self, fnref: FnRef, args: list):
        fn = fnref.fn
        fs = self._state(fn)
        warm = fs.calls >= self.warmup
        fs.calls += 1
        interp = self.interp
        if (fs.mode != UNCONVERTIBLE and len(args) == len(fn.params)
                and interp.depth + DEPTH_MARGIN < MAX_INVOKE_DEPTH):
            entry = fs.lookup(args)
            if entry is not None:
                t0 = time.perf_counter()
                outcome = self.executor.execute(entry.graph, args, self.heap, self.out, interp.depth)
                fs.graph_time += time.perf_counter() - t0
                if not isinstance(outcome, Aborted):
                    fs.graph_calls += 1
                    entry.hits += 1
                    self._tick += 1
                    entry.last_hit = self._tick
                    return outcome.value
                self.on_failure(fs, entry, outcome)
        if self.mode == GRAPH_ONLY and warm:
            why = fs.reason if fs.mode == UNCONVERTIBLE else "no graph could serve the call"
            raise GraphOnlyViolation(f"call {fs.calls} of {fn.name} needs the interpreter: {why}")
        result = self._interpret(fs, fnref, args)
        self._maybe_generate(fs, args)
        return result

    def _interpret(self, fs: FunctionState, fnref, args):
        interp = self.interp
        saved = interp.sink
        interp.sink = self.profile if fs.mode != UNCONVERTIBLE else None
        fs.interpreted_calls += 1
        t0 = time.perf_counter()
        try:
            return interp.call_function(fnref, args)
        finally:
            fs.interp_time += time.perf_counter() - t0
            interp.sink = saved

    # -- failure policy --------------------------------------------------------------

    def on_failure(self, fs: FunctionState, entry: CacheEntry, outcome: Aborted) -> str:
        """Record an abort and decide the entry's fate. Returns the action taken."""
        if outcome.error is not None:
            # a runtime error inside the graph: the interpreter reports it
            fs.aborts["error"] += 1
            entry.errors += 1
            return "fallback"
        a = entry.assumptions.get(outcome.assumption_id)
        if a is None:
            fs.aborts["unknown"] += 1
            entry.state = RETIRED
            return "retire"
        cat = a.category
        fs.aborts[cat] += 1
        slot = (a.site, cat)
        entry.fails[slot] += 1
        if cat in CONTROL_CATEGORIES:
            fs.overrides[slot] = None
            entry.state = RETIRED
            return "drop"
        if entry.fails[slot] < FAIL_THRESHOLD:
            return "keep"
        relaxed = relax(a, outcome.observed)
        new = TOP_SPEC if relaxed is None else relaxed.payload.spec
        old = fs.overrides.get((a.site, "spec"))
        fs.overrides[(a.site, "spec")] = new if old is None else join(old, new)
        entry.state = RETIRED
        return "relax"

    # -- generation --------------------------------------------------------------------

    def dispatch_key(self, fn: A.FnDef, args) -> tuple:
        key = []
        for p, a in zip(fn.params, args):
            k = kind_of(a)
            if k != TENSOR or not self.options.specialize:
                key.append(kind_spec(k))
                continue
            obs = [s for s in self.profile.values.get(p.site, []) if s.kind == TENSOR]
            spec = join_all(obs)
            if spec is None or spec.level >= KIND or not matches(spec, a):
                spec = shape_spec(a.shape)
            elif spec.level == VALUE:
                spec = shape_spec(spec.shape)
            key.append(spec)
        return tuple(key)

    def _maybe_generate(self, fs: FunctionState, args):
        if fs.mode == UNCONVERTIBLE or len(args) != len(fs.fn.params):
            return
        facts = summarize(self.profile, fs.fn.site, self.warmup)
        if facts is None or fs.lookup(args) is not None:
            return
        key = self.dispatch_key(fs.fn, args)
        globals_ = self.heap.globals
        directs = {name: f for name, f in self._directs.items()
                   if type(globals_.get(name)) is FnRef and globals_[name].fn is f}
        fs.generations += 1
        try:
            g, aset = generate(self.program, fs.fn, facts, list(key), self.options,
                               fs.overrides, directs)
        except Unconvertible as e:
            fs.mode, fs.reason = UNCONVERTIBLE, e.reason
            return
        before = g.total_nodes()
        optimize(g)
        entry = CacheEntry(fs.fn.site, key, g, aset, nodes_before=before, nodes_after=g.total_nodes())
        # a fresh entry counts as recently used, so eviction prefers older ones
        self._tick += 1
        entry.last_hit = self._tick
        fs.entries.append(entry)
        fs.entries.sort(key=lambda e: (e.state != ACTIVE, e.specificity))
        fs.mode = COMPILED
        self._evict()

    def _evict(self):
        if self.cache_max is None:
            return
        active = [e for fs in self.functions.values() for e in fs.active()]
        if len(active) <= self.cache_max:
            return
        active.sort(key=lambda e: (e.last_hit, e.hits))
        for e in active[:len(active) - self.cache_max]:
            e.state = EVICTED

    # -- reporting ----------------------------------------------------------------------

    def stats(self) -> dict:
        with self._lock:
            return self._stats()

    def _stats(self) -> dict:
        fns = {}
        aborts: Counter = Counter()
        for fs in sorted(self.functions.values(), key=lambda f: f.fn.site):
            fns[f"{fs.fn.name}@{fs.fn.site}"] = fs.to_json()
            aborts.update(fs.aborts)
        return {
            "mode": self.mode,
            "graph_calls": sum(f.graph_calls for f in self.functions.values()),
            "interpreted_calls": sum(f.interpreted_calls for f in self.functions.values()),
            "cache_entries": sum(len(f.active()) for f in self.functions.values()),
            "historical_entries": sum(len(f.entries) for f in self.functions.values()),
            "aborts": dict(sorted(aborts.items())),
            "engines": dict(self.executor.engine_counts),
            "functions": fns,
            "profile": self.profile.to_json(),
        }

    def best_graph(self):
        """The most-hit active graph (for --dump-graph), or None."""
        best = None
        for fs in self.functions.values():
            for e in fs.entries:
                if e.state == ACTIVE and (best is None or e.hits >= best.hits):
                    best = e
        return best.graph if best else None


def run_source(source: str, **kwargs) -> Runtime:
    from specjit.frontend import load

    rt = Runtime(load(source), **kwargs)
    try:
        rt.run()
    finally:
        rt.close()
    return rt


__all__ = [
    "ACTIVE", "CacheEntry", "FunctionState", "GRAPH_ONLY", "IMPERATIVE", "MODES", "RETIRED",
    "Runtime", "SPECULATIVE", "run_source",
]
