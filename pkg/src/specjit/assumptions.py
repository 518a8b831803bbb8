"""Specialization lattice, assumptions and relaxation.

The lattice orders how precisely a value site is pinned:
Value < Shape < PartialShape < Kind < Top. Shape levels only exist for
tensors; other kinds go straight from Value to Kind.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

from specjit.runtime.values import (
    BOOL, FLOAT, INT, KINDS, TENSOR, encode_value, kind_of, render_float, same_value,
)

VALUE, SHAPE, PARTIAL, KIND, TOP = 0, 1, 2, 3, 4
LEVEL_NAMES = ("Value", "Shape", "PartialShape", "Kind", "Top")

UNKNOWN = None  # an unknown tensor dim


def _dims_text(shape) -> str:
    return "(" + ",".join("?" if d is None else str(d) for d in shape) + ")"


def _const_text(v) -> str:
    k = kind_of(v)
    if k == FLOAT:
        return render_float(v)
    if k == TENSOR:
        return "tensor" + _dims_text(v.shape) + ":" + hashlib.sha1(v.tobytes()).hexdigest()[:10]
    if k in (INT, BOOL):
        return str(v).lower() if k == BOOL else str(v)
    return repr(encode_value(v))


@dataclass(frozen=True, eq=False)
class ValueSpec:
    level: int
    kind: str | None = None
    shape: tuple | None = None
    constant: Any = None

    def __post_init__(self):
        lvl, kind, shape = self.level, self.kind, self.shape
        if lvl not in (VALUE, SHAPE, PARTIAL, KIND, TOP):
            raise ValueError(f"bad level {lvl}")
        if lvl == TOP:
            if kind is not None or shape is not None:
                raise ValueError("Top carries no kind or shape")
            return
        if kind not in KINDS:
            raise ValueError(f"bad kind {kind}")
        if lvl == VALUE:
            if kind_of(self.constant) != kind:
                raise ValueError("Value level needs a constant of the spec's kind")
            if kind == TENSOR and tuple(self.constant.shape) != shape:
                raise ValueError("tensor constant shape disagrees with spec shape")
        elif self.constant is not None:
            raise ValueError("only Value level carries a constant")
        if lvl in (SHAPE, PARTIAL):
            if kind != TENSOR or shape is None:
                raise ValueError("shape levels are for tensors only")
            unknown = any(d is None for d in shape)
            if lvl == SHAPE and unknown:
                raise ValueError("Shape level has no unknown dims")
            if lvl == PARTIAL and not unknown:
                raise ValueError("PartialShape needs an unknown dim")
        if lvl == KIND and shape is not None:
            raise ValueError("Kind level carries no shape")

    @property
    def key(self):
        const = encode_value(self.constant) if self.level == VALUE else None
        return (self.level, self.kind, self.shape, const)

    def __eq__(self, other):
        return isinstance(other, ValueSpec) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def unknown_dims(self) -> int:
        return sum(1 for d in self.shape if d is None) if self.shape else 0

    def text(self) -> str:
        if self.level == TOP:
            return "Top"
        if self.level == KIND:
            return f"Kind({self.kind})"
        if self.level == VALUE:
            return f"Value({self.kind} {_const_text(self.constant)})"
        return LEVEL_NAMES[self.level] + _dims_text(self.shape)

    __str__ = text

    def __repr__(self):
        return f"ValueSpec<{self.text()}>"


TOP_SPEC = ValueSpec(TOP)


def kind_spec(kind: str) -> ValueSpec:
    return ValueSpec(KIND, kind)


def shape_spec(dims) -> ValueSpec:
    dims = tuple(dims)
    return ValueSpec(PARTIAL if any(d is None for d in dims) else SHAPE, TENSOR, dims)


def spec_of(v) -> ValueSpec:
    k = kind_of(v)
    shape = tuple(int(d) for d in v.shape) if k == TENSOR else None
    return ValueSpec(VALUE, k, shape, v)


def join(a: ValueSpec, b: ValueSpec) -> ValueSpec:
    """Least upper bound."""
    if a == b:
        return a
    if a.level == TOP or b.level == TOP or a.kind != b.kind:
        return TOP_SPEC
    if a.kind != TENSOR or a.level == KIND or b.level == KIND:
        return kind_spec(a.kind)
    if len(a.shape) != len(b.shape):
        return kind_spec(TENSOR)
    return shape_spec(x if x == y else UNKNOWN for x, y in zip(a.shape, b.shape))


def join_all(specs) -> ValueSpec | None:
    out = None
    for s in specs:
        out = s if out is None else join(out, s)
    return out


def leq(a: ValueSpec, b: ValueSpec) -> bool:
    return join(a, b) == b


def matches(spec: ValueSpec, v) -> bool:
    if spec.level == TOP:
        return True
    if kind_of(v) != spec.kind:
        return False
    if spec.level == VALUE:
        return same_value(v, spec.constant)
    if spec.level == KIND:
        return True
    shape = v.shape
    if len(shape) != len(spec.shape):
        return False
    for want, got in zip(spec.shape, shape):
        if want is not None and want != got:
            return False
    return True


def specificity(spec: ValueSpec) -> int:
    """Smaller is more specific; strictly-below in the lattice implies smaller."""
    return spec.level * 1000 + spec.unknown_dims


def cap_level(spec: ValueSpec, level: int) -> ValueSpec:
    """Coarsen ``spec`` to at most ``level`` precision (used by --no-specialize)."""
    if spec.level >= level:
        return spec
    if level >= KIND:
        return kind_spec(spec.kind) if level == KIND else TOP_SPEC
    if spec.kind == TENSOR and spec.level == VALUE:
        return shape_spec(spec.shape)
    return spec


def is_promotable(spec: ValueSpec | None) -> bool:
    """Constant promotion applies to Int, Float, Bool and scalar tensors only."""
    if spec is None or spec.level != VALUE:
        return False
    if spec.kind in (INT, FLOAT, BOOL):
        return True
    return spec.kind == TENSOR and spec.constant.ndim == 0


# -- assumptions -----------------------------------------------------------------

DISPATCH = "D"
RUNTIME = "R"


@dataclass(frozen=True)
class BranchStable:
    arm: str
    category = "branch"

    def text(self):
        return f"branch={self.arm}"


@dataclass(frozen=True)
class TripCount:
    n: int
    category = "trip_count"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("trip count must be non-negative")

    def text(self):
        return f"trips={self.n}"


@dataclass(frozen=True)
class CalleeStable:
    fn_id: int
    category = "callee"

    def text(self):
        return f"callee=fn@{self.fn_id}"


@dataclass(frozen=True)
class ValueSpecAt:
    spec: ValueSpec
    category = "spec"

    def __post_init__(self):
        if self.spec.level == TOP:
            raise ValueError("Top is not an assumption")

    def text(self):
        return f"spec={self.spec.text()}"


@dataclass(frozen=True)
class Assumption:
    """A claim about one site. ``instance`` distinguishes copies of the same
    source site created by unrolling or inlining."""

    site: Any
    payload: Any
    mode: str = RUNTIME
    instance: tuple = ()
    id: str = field(init=False, compare=False)

    def __post_init__(self):
        if self.mode not in (DISPATCH, RUNTIME):
            raise ValueError(f"bad mode {self.mode}")
        raw = f"{self.site}|{'/'.join(map(str, self.instance))}|{self.payload.text()}"
        object.__setattr__(self, "id", "a" + hashlib.sha1(raw.encode()).hexdigest()[:12])

    @property
    def category(self) -> str:
        return self.payload.category

    def render(self, fails: int = 0) -> str:
        inst = "" if not self.instance else "/" + ".".join(map(str, self.instance))
        return f"site={self.site}{inst} payload={self.payload.text()} mode={self.mode} fails={fails}"


DROP = None


def relax(a: Assumption, observed) -> Assumption | None:
    """Weaken a failed assumption just enough to admit ``observed``; None = drop."""
    if isinstance(a.payload, ValueSpecAt):
        j = join(a.payload.spec, spec_of(observed))
        if j.level == TOP:
            return DROP
        return Assumption(a.site, ValueSpecAt(j), a.mode, a.instance)
    return DROP


class AssumptionSet:
    def __init__(self, items=()):
        self._by_id: dict[str, Assumption] = {}
        self._slots: set = set()
        for a in items:
            self.add(a)

    def add(self, a: Assumption) -> Assumption:
        slot = (a.site, a.instance, a.category)
        if slot in self._slots:
            if self._by_id.get(a.id) == a:
                return a
            raise ValueError(f"conflicting assumption for {slot}")
        self._slots.add(slot)
        self._by_id[a.id] = a
        return a

    def __iter__(self):
        return iter(sorted(self._by_id.values(), key=lambda a: a.id))

    def __len__(self):
        return len(self._by_id)

    def __contains__(self, aid):
        return aid in self._by_id

    def get(self, aid) -> Assumption | None:
        return self._by_id.get(aid)

    def __eq__(self, other):
        return isinstance(other, AssumptionSet) and set(self._by_id) == set(other._by_id)

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for aid in sorted(self._by_id):
            h.update(aid.encode())
        return h.hexdigest()[:16]

    def runtime_asserted(self) -> list[Assumption]:
        return [a for a in self if a.mode == RUNTIME]

