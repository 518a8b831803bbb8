"""Runtime observations from interpreted calls and their stability summary."""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

from specjit.assumptions import VALUE, ValueSpec, is_promotable, join, join_all, matches, spec_of

# Once a site has seen this many distinct specs the list is collapsed to
# their join; the join (the only thing summarize uses) is unchanged.
MAX_DISTINCT_SPECS = 8


# -- events (the generic ``record`` entry point) ---------------------------------

@dataclass(frozen=True)
class BranchTaken:
    site: Any
    arm: str


@dataclass(frozen=True)
class LoopDone:
    site: Any
    trips: int


@dataclass(frozen=True)
class ValueAt:
    site: Any
    value: Any


@dataclass(frozen=True)
class CalleeAt:
    site: Any
    fn_id: int


@dataclass(frozen=True)
class CallEntered:
    fn_id: int
    args: tuple = ()


class ProfileRecord:
    """Histograms keyed by site id; also the interpreter's profiling sink."""

    def __init__(self):
        self.calls: Counter = Counter()
        self.branches: dict[Any, Counter] = {}
        self.trip_counts: dict[Any, Counter] = {}
        self.values: dict[Any, list[ValueSpec]] = {}
        self.callees: dict[Any, Counter] = {}

    # sink protocol used by the interpreter
    def call(self, fn_id, args):
        self.calls[fn_id] += 1

    def branch(self, site, arm):
        hist = self.branches.get(site)
        if hist is None:
            hist = self.branches[site] = Counter()
        hist[arm] += 1

    def trips(self, site, n):
        hist = self.trip_counts.get(site)
        if hist is None:
            hist = self.trip_counts[site] = Counter()
        hist[n] += 1

    def callee(self, site, fn_id):
        hist = self.callees.get(site)
        if hist is None:
            hist = self.callees[site] = Counter()
        hist[fn_id] += 1

    def value(self, site, v):
        obs = self.values.get(site)
        if obs is None:
            self.values[site] = [spec_of(v)]
            return
        if len(obs) == 1 and obs[0].level > VALUE and matches(obs[0], v):
            return
        spec = spec_of(v)
        if spec in obs:
            return
        obs.append(spec)
        if len(obs) > MAX_DISTINCT_SPECS:
            obs[:] = [join_all(obs)]

    def record(self, event):
        if isinstance(event, BranchTaken):
            self.branch(event.site, event.arm)
        elif isinstance(event, LoopDone):
            self.trips(event.site, event.trips)
        elif isinstance(event, ValueAt):
            self.value(event.site, event.value)
        elif isinstance(event, CalleeAt):
            self.callee(event.site, event.fn_id)
        elif isinstance(event, CallEntered):
            self.call(event.fn_id, event.args)
        else:
            raise TypeError(f"unknown profile event {event!r}")

    def snapshot(self) -> "ProfileRecord":
        return copy.deepcopy(self)

    def to_json(self) -> dict:
        def hist(d):
            return {str(k): {str(a): n for a, n in sorted(v.items(), key=lambda kv: str(kv[0]))}
                    for k, v in sorted(d.items(), key=lambda kv: str(kv[0]))}
        return {
            "calls": {str(k): v for k, v in sorted(self.calls.items())},
            "branches": hist(self.branches),
            "trips": hist(self.trip_counts),
            "callees": hist(self.callees),
            "values": {str(k): [s.text() for s in v]
                       for k, v in sorted(self.values.items(), key=lambda kv: str(kv[0]))},
        }


def record(sink: ProfileRecord, event) -> None:
    sink.record(event)


def _unanimous(hist: Counter | None):
    if not hist:
        return None
    if len(hist) == 1:
        return next(iter(hist))
    return None


@dataclass
class StabilityFacts:
    """Per-site summary. ``None`` from a query means unstable or unobserved."""

    fn_id: int
    calls: int
    branches: dict = field(default_factory=dict)
    trips: dict = field(default_factory=dict)
    callees: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    constants: frozenset = frozenset()
    observed: frozenset = frozenset()

    def branch(self, site):
        return self.branches.get(site)

    def trip(self, site):
        return self.trips.get(site)

    def callee(self, site):
        return self.callees.get(site)

    def value(self, site) -> ValueSpec | None:
        return self.values.get(site)

    def is_constant(self, site) -> bool:
        return site in self.constants

    def was_observed(self, site) -> bool:
        return site in self.observed


NOT_READY = None


def summarize(rec: ProfileRecord, fn_id: int, warmup: int = 3) -> StabilityFacts | None:
    if warmup < 1:
        raise ValueError("warmup must be at least 1")
    calls = rec.calls.get(fn_id, 0)
    if calls < warmup:
        return NOT_READY
    facts = StabilityFacts(fn_id, calls)
    observed = set()
    for site, hist in rec.branches.items():
        observed.add(site)
        facts.branches[site] = _unanimous(hist)
    for site, hist in rec.trip_counts.items():
        observed.add(site)
        facts.trips[site] = _unanimous(hist)
    for site, hist in rec.callees.items():
        facts.callees[site] = _unanimous(hist)
    constants = set()
    for site, obs in rec.values.items():
        j = join_all(obs)
        facts.values[site] = j
        if len(obs) == 1 and is_promotable(obs[0]):
            constants.add(site)
    facts.constants = frozenset(constants)
    facts.observed = frozenset(observed)
    return facts


__all__ = [
    "BranchTaken", "CallEntered", "CalleeAt", "LoopDone", "NOT_READY", "ProfileRecord",
    "StabilityFacts", "ValueAt", "join", "record", "summarize",
]
