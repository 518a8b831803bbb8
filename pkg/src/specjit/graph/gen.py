"""Speculative graph generation from a resolved function AST.

The generator walks the function body once, keeping a symbol table from SL
variables to graph values. Profile facts decide how each construct lowers:
stable branches keep only the taken arm behind an Assert, stable loops are
unrolled, stable callees are inlined, and observed value sites get a
specialization Assert. Anything unstable lowers to Switch/Merge and loop
frames instead.

The heap state and the globals handle live in the symbol table under the
pseudo-names ``%state`` and ``%globals``, so branch merging and loop
carrying treat them like ordinary variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from specjit.assumptions import (
    KIND, RUNTIME, TOP, VALUE, Assumption, AssumptionSet, BranchStable, CalleeStable, DISPATCH,
    TripCount, ValueSpec, ValueSpecAt, join, kind_spec, shape_spec,
)
from specjit.errors import Unconvertible
from specjit.frontend import ast as A
from specjit.graph.ir import Graph, validate
from specjit.runtime import ops
from specjit.runtime.values import BOOL, FLOAT, INT, LIST, RECORD, TENSOR, kind_of

STATE = "%state"
GLOBALS = "%globals"
ASSERTABLE = (INT, FLOAT, BOOL, TENSOR)
NOCONST = object()


@dataclass
class GenOptions:
    unroll: bool = True
    specialize: bool = True
    max_unroll: int = 10000
    node_budget: int = 300_000
    inline_depth: int = 8


@dataclass
class Val:
    ref: tuple
    kind: str | None = None
    const: Any = NOCONST


class Region:
    """A scope of conditional execution. Arm regions gate their nodes on a
    pivot; frame regions hold the loop condition of a dynamic loop."""

    __slots__ = ("parent", "kind", "pivot", "wrapped", "pending")

    def __init__(self, kind, parent=None, pivot=None):
        self.kind = kind
        self.parent = parent
        self.pivot = pivot
        self.wrapped: dict[tuple, tuple] = {}
        self.pending: list[int] = []


@dataclass
class Ctx:
    fn: A.FnDef
    env: dict
    instance: tuple = ()

    def fork(self, *qual) -> "Ctx":
        return Ctx(self.fn, self.env, self.instance + qual)


def direct_functions(program: A.Program) -> dict[str, A.FnDef]:
    """Global names bound exactly once, by a top-level ``fn``, and never reassigned."""
    defs: dict[str, list] = {}
    other: set[str] = set()
    for node in A.walk(program):
        if isinstance(node, A.FnDef):
            if any(node is top for top in program.body):
                defs.setdefault(node.name, []).append(node)
            else:
                other.add(node.name)
        elif isinstance(node, (A.Let, A.Assign)) and node.scope in (A.GLOBAL, None):
            other.add(node.name)
        elif isinstance(node, A.ForIn) and node.scope in (A.GLOBAL, None):
            other.add(node.var)
    return {name: fns[0] for name, fns in defs.items() if len(fns) == 1 and name not in other}


def _loop_names(loop) -> set[str]:
    names = set()
    parts = [loop.body, [loop.cond] if isinstance(loop, A.While) else [loop.iter]]
    for part in parts:
        for stmt in part:
            for n in A.walk(stmt):
                if isinstance(n, A.Name) and n.scope in (A.LOCAL, A.PARAM):
                    names.add(n.name)
                elif isinstance(n, (A.Let, A.Assign)) and n.scope in (A.LOCAL, A.PARAM):
                    names.add(n.name)
                elif isinstance(n, A.ForIn) and n.scope in (A.LOCAL, A.PARAM):
                    names.add(n.var)
    if isinstance(loop, A.ForIn):
        names.add(loop.var)
    return names


def _join_kind(a, b):
    return a if a == b else None


class Generator:
    """Shared state for one generation request (top graph plus subgraphs)."""

    def __init__(self, program: A.Program, facts, options: GenOptions | None = None,
                 overrides: dict | None = None, directs: dict | None = None):
        self.program = program
        self.facts = facts
        self.opts = options or GenOptions()
        self.overrides = overrides or {}
        self.directs = direct_functions(program) if directs is None else directs
        self.assumptions: list[Assumption] = []
        self.subgraphs: dict[str, Graph] = {}
        self.sub_for_fn: dict[int, str] = {}

    # -- facts with relaxation applied -----------------------------------------

    def dropped(self, site, category) -> bool:
        return (site, category) in self.overrides

    def value_spec(self, site) -> ValueSpec | None:
        s = self.facts.value(site)
        o = self.overrides.get((site, "spec"))
        if o is not None:
            s = o if s is None else join(s, o)
        if s is None or s.level == TOP:
            return None
        return s

    def is_constant(self, site) -> bool:
        return self.facts.is_constant(site) and (site, "spec") not in self.overrides

    def cap(self, spec: ValueSpec) -> ValueSpec:
        """Coarsest-needed spec for an Assert or a dispatch key."""
        if not self.opts.specialize or spec.level >= KIND:
            return kind_spec(spec.kind) if spec.level < TOP else spec
        if spec.kind == TENSOR:
            return shape_spec(spec.shape) if spec.level == VALUE else spec
        return kind_spec(spec.kind)

    # -- entry point ---------------------------------------------------------------

    def generate(self, fn: A.FnDef, param_specs: list[ValueSpec]) -> tuple[Graph, AssumptionSet]:
        if fn.captures:
            raise Unconvertible(f"{fn.name} captures enclosing variables")
        if len(param_specs) != len(fn.params):
            raise ValueError("one spec per parameter required")
        g = Graph(id=f"{fn.name}@{fn.site}", name=fn.name, n_params=len(fn.params))
        g.subgraphs = self.subgraphs
        b = Builder(self, g, fn)
        params = []
        for i, (p, spec) in enumerate(zip(fn.params, param_specs)):
            ref = (g.add("Arg", {"index": i, "name": p.name}), 0)
            kind = spec.kind if spec.level < TOP else None
            if spec.level < TOP:
                self.assumptions.append(Assumption(p.site, ValueSpecAt(spec), DISPATCH))
            params.append(Val(ref, kind))
        b.build(params)
        try:
            aset = AssumptionSet(self.assumptions)
        except ValueError as e:
            raise Unconvertible(f"inconsistent assumptions: {e}") from None
        g.assumptions = list(aset)
        g.fingerprint = aset.fingerprint
        errs = validate(g)
        if errs:
            raise AssertionError("generated graph is invalid: " + "; ".join(map(str, errs[:5])))
        return g, aset

    def subgraph_for(self, fn: A.FnDef) -> str:
        sid = self.sub_for_fn.get(fn.site)
        if sid is not None:
            return sid
        sid = f"{fn.name}@{fn.site}/inv"
        g = Graph(id=sid, name=fn.name, n_params=len(fn.params))
        g.subgraphs = self.subgraphs
        self.sub_for_fn[fn.site] = sid
        self.subgraphs[sid] = g
        b = Builder(self, g, fn, instance=("inv", fn.site))
        params = []
        for i, p in enumerate(fn.params):
            spec = self.value_spec(p.site)
            if spec is None:
                raise Unconvertible(f"parameter {p.name} of recursive {fn.name} has no stable kind")
            ref = b.arg(i, p.name)
            params.append(b.specialize_param(p.site, ref, self.cap(spec)))
        b.build(params)
        return sid


@dataclass
class _Checkpoint:
    next_id: int
    n_assumptions: int
    seq: int
    subgraphs: frozenset
    env: dict = field(default_factory=dict)


class Builder:
    """Emits the nodes of one graph."""

    def __init__(self, gen: Generator, g: Graph, fn: A.FnDef, instance: tuple = ()):
        self.gen = gen
        self.g = g
        self.fn = fn
        self.instance = instance
        self.root = Region("root")
        self.region = self.root
        self.node_region: dict[int, Region] = {}
        self.seq = 0
        self.frames = 0
        self.inline_stack: list[int] = [fn.site]

    # -- graph plumbing ---------------------------------------------------------

    def build(self, params: list[Val]):
        g = self.g
        fn = self.fn
        globals_ref = (g.add("Arg", {"role": "globals"}), 0)
        state_ref = (g.add("Arg", {"role": "state"}), 0)
        for nid in (globals_ref[0], state_ref[0]):
            self.node_region[nid] = self.root
        for v in params:
            self.node_region.setdefault(v.ref[0], self.root)
        env = {p.name: v for p, v in zip(fn.params, params)}
        env[STATE] = Val(state_ref)
        env[GLOBALS] = Val(globals_ref)
        ctx = Ctx(fn, env, self.instance)
        ret = self.body(fn.body, ctx)
        g.outputs = [ret.ref]
        g.state_output = ctx.env[STATE].ref

    def add(self, kind, attrs=None, inputs=(), ctrl=(), region=None) -> int:
        region = region or self.region
        inputs = [self.local(r, region) for r in inputs]
        ctrl = list(ctrl)
        if not inputs and region.pivot is not None:
            ctrl.append(region.pivot[0])
        nid = self.g.add(kind, attrs, inputs, ctrl)
        self.node_region[nid] = region
        if self.g.next_id > self.gen.opts.node_budget:
            raise Unconvertible("graph exceeds the node budget")
        return nid

    def add_raw(self, kind, attrs, inputs, region) -> int:
        """Add a node whose inputs are already valid in ``region``."""
        nid = self.g.add(kind, attrs, inputs)
        self.node_region[nid] = region
        return nid

    def arg(self, index, name) -> tuple:
        nid = self.add_raw("Arg", {"index": index, "name": name}, [], self.root)
        return (nid, 0)

    def local(self, ref, region=None):
        """``ref`` as seen from inside ``region`` (gated on the arm pivots)."""
        region = region or self.region
        src = self.node_region[ref[0]]
        if src is region:
            return ref
        r = region
        while r is not None and r is not src:
            r = r.parent
        if r is None:
            raise Unconvertible("value used outside the region that defines it")
        return self._wrap(ref, region, src)

    def _wrap(self, ref, region, src):
        if region is src:
            return ref
        hit = region.wrapped.get(ref)
        if hit is not None:
            return hit
        if region.kind == "frame":
            raise Unconvertible("loop body uses a value that is not loop-carried")
        outer = self._wrap(ref, region.parent, src)
        nid = self.g.add("Identity", {}, [outer], [region.pivot[0]])
        self.node_region[nid] = region
        region.wrapped[ref] = (nid, 0)
        return (nid, 0)

    def const(self, value) -> Val:
        nid = self.add("Const", {"value": value})
        return Val((nid, 0), kind_of(value), value)

    def state_op(self, ctx, kind, attrs, inputs) -> int:
        """A node taking the state token in slot 0 and yielding it on output 0."""
        if kind in ("SetAttr", "SetSubscr", "ListAppend", "Print"):
            attrs = dict(attrs, seq=self.seq)
            self.seq += 1
            ctrl, self.region.pending = self.region.pending, []
        else:
            ctrl = []
        nid = self.add(kind, attrs, [ctx.env[STATE].ref] + list(inputs), ctrl)
        ctx.env[STATE] = Val((nid, 0))
        return nid

    def emit_assert(self, ref, assumption: Assumption, comparator, expected):
        self.gen.assumptions.append(assumption)
        nid = self.add("Assert", {"assumption": assumption.id, "comparator": comparator,
                                  "expected": expected}, [ref])
        self.region.pending.append(nid)
        return nid

    def checkpoint(self, ctx) -> _Checkpoint:
        return _Checkpoint(self.g.next_id, len(self.gen.assumptions), self.seq,
                           frozenset(self.gen.subgraphs), dict(ctx.env))

    def rollback(self, cp: _Checkpoint, ctx):
        g = self.g
        for nid in range(cp.next_id, g.next_id):
            g.nodes.pop(nid, None)
            self.node_region.pop(nid, None)
        g.next_id = cp.next_id
        del self.gen.assumptions[cp.n_assumptions:]
        self.seq = cp.seq
        for sid in set(self.gen.subgraphs) - cp.subgraphs:
            del self.gen.subgraphs[sid]
            self.gen.sub_for_fn = {k: v for k, v in self.gen.sub_for_fn.items() if v != sid}
        r = self.region
        while r is not None:
            r.wrapped = {k: v for k, v in r.wrapped.items() if v[0] < cp.next_id}
            r.pending = [n for n in r.pending if n < cp.next_id]
            r = r.parent
        ctx.env.clear()
        ctx.env.update(cp.env)

    # -- specialization at value sites ------------------------------------------

    def specialize_param(self, site, ref, spec: ValueSpec) -> Val:
        if spec.kind not in ASSERTABLE:
            return Val(ref)
        a = Assumption(site, ValueSpecAt(spec), RUNTIME, self.instance)
        self.emit_assert(ref, a, "ShapeMatch", spec)
        return Val(ref, spec.kind)

    def site_value(self, site, ref, ctx) -> Val:
        gen = self.gen
        spec = gen.value_spec(site)
        if spec is None or spec.kind not in ASSERTABLE:
            return Val(ref)
        if gen.opts.specialize and spec.level == VALUE and gen.is_constant(site):
            a = Assumption(site, ValueSpecAt(spec), RUNTIME, ctx.instance)
            self.emit_assert(ref, a, "ValueEq", spec.constant)
            return self.const(spec.constant)
        spec = gen.cap(spec)
        a = Assumption(site, ValueSpecAt(spec), RUNTIME, ctx.instance)
        self.emit_assert(ref, a, "ShapeMatch", spec)
        return Val(ref, spec.kind)

    # -- statements ----------------------------------------------------------------

    def body(self, stmts, ctx) -> Val:
        r = self.seq_(stmts, ctx)
        return r if r is not None else self.const(None)

    def seq_(self, stmts, ctx) -> Val | None:
        """Generate a function-level statement list; returns the return value,
        or None when control falls off the end."""
        for i, s in enumerate(stmts):
            t = type(s)
            if t is A.Return:
                return self.expr(s.value, ctx) if s.value is not None else self.const(None)
            if t is A.If and A.contains([s], (A.Return,)):
                return self.if_returning(s, list(stmts[i + 1:]), ctx)
            self.stmt(s, ctx)
        return None

    def block(self, stmts, ctx):
        for s in stmts:
            if type(s) is A.Return:
                raise Unconvertible("return inside a loop")
            self.stmt(s, ctx)

    def stmt(self, s, ctx):
        t = type(s)
        if t is A.Let or t is A.Assign:
            self.bind(s.name, s.scope, self.expr(s.value, ctx), ctx)
        elif t is A.ExprStmt:
            self.expr(s.expr, ctx)
        elif t is A.If:
            self.if_(s, ctx)
        elif t is A.While:
            self.while_(s, ctx)
        elif t is A.ForIn:
            self.for_(s, ctx)
        elif t is A.Assert:
            v = self.expr(s.cond, ctx)
            self.add("Check", {}, [v.ref])
        elif t is A.AttrAssign:
            obj = self.expr(s.obj, ctx)
            val = self.expr(s.value, ctx)
            self.state_op(ctx, "SetAttr", {"name": s.name}, [obj.ref, val.ref])
        elif t is A.SubscrAssign:
            obj = self.expr(s.obj, ctx)
            idx = self.expr(s.index, ctx)
            val = self.expr(s.value, ctx)
            self.state_op(ctx, "SetSubscr", {}, [obj.ref, idx.ref, val.ref])
        elif t is A.GlobalDecl:
            pass
        elif t is A.FnDef:
            raise Unconvertible("nested function definition")
        elif t in (A.Break, A.Continue):
            raise Unconvertible(f"{t.__name__.lower()} in compiled code")
        elif t is A.Return:
            raise Unconvertible("return outside function-level sequence")
        else:
            raise Unconvertible(f"unsupported statement {t.__name__}")

    def bind(self, name, scope, v: Val, ctx):
        if scope == A.GLOBAL:
            self.state_op(ctx, "SetAttr", {"name": name}, [ctx.env[GLOBALS].ref, v.ref])
        else:
            ctx.env[name] = v

    # -- branches --------------------------------------------------------------------

    def pred(self, cond, ctx) -> Val:
        v = self.expr(cond, ctx)
        if v.kind == BOOL:
            return v
        nid = self.add("UnOp", {"op": "truth"}, [v.ref])
        return Val((nid, 0), BOOL)

    def branch_fact(self, site) -> str | None:
        if not self.gen.opts.unroll or self.gen.dropped(site, "branch"):
            return None
        return self.gen.facts.branch(site)

    def decide(self, site, pred: Val, ctx, then_value=True) -> bool | None:
        """Whether the "then" arm runs, when lowered as a single arm; None when
        dynamic. ``then_value`` is the predicate value selecting "then"."""
        if pred.const is True or pred.const is False:
            return pred.const is then_value
        arm = self.branch_fact(site)
        if arm is None:
            return None
        a = Assumption(site, BranchStable(arm), RUNTIME, ctx.instance)
        self.emit_assert(pred.ref, a, "EqArm", then_value if arm == "then" else not then_value)
        return arm == "then"

    def open_arms(self, pred: Val):
        sw = self.add("Switch", {}, [pred.ref, pred.ref])
        regions = []
        for k in (0, 1):
            piv = self.add("Identity", {}, [(sw, k)])
            regions.append(Region("arm", self.region, (piv, 0)))
        for r in regions:
            self.node_region[r.pivot[0]] = self.region
        return regions

    def merge_envs(self, pre: dict, arms: list[tuple[Region, dict]]) -> dict:
        (rt, et), (rf, ef) = arms
        out = {}
        for name in et:
            if name not in ef:
                continue
            vt, vf = et[name], ef[name]
            if vt.ref == vf.ref:
                out[name] = vt
                continue
            m = self.add_raw("Merge", {}, [self.local(vt.ref, rt), self.local(vf.ref, rf)], self.region)
            out[name] = Val((m, 0), _join_kind(vt.kind, vf.kind))
        return out

    def if_(self, s, ctx):
        pred = self.pred(s.cond, ctx)
        arm = self.decide(s.site, pred, ctx)
        if arm is True:
            self.block(s.then, ctx)
            return
        if arm is False:
            self.block(s.orelse or [], ctx)
            return
        pre = dict(ctx.env)
        results = []
        for region, stmts, tag in zip(self.open_arms(pred), (s.then, s.orelse or []), ("t", "f")):
            saved = self.region
            self.region = region
            actx = Ctx(ctx.fn, dict(pre), ctx.instance + (s.site, tag))
            try:
                self.block(stmts, actx)
            finally:
                self.region = saved
            results.append((region, actx.env))
        ctx.env.clear()
        ctx.env.update(self.merge_envs(pre, results))

    def if_returning(self, s, rest, ctx) -> Val | None:
        pred = self.pred(s.cond, ctx)
        arm = self.decide(s.site, pred, ctx)
        if arm is not None:
            return self.seq_((s.then if arm else (s.orelse or [])) + rest, ctx)
        pre = dict(ctx.env)
        results = []
        rets = []
        for region, stmts, tag in zip(self.open_arms(pred), (s.then, s.orelse or []), ("t", "f")):
            saved = self.region
            self.region = region
            actx = Ctx(ctx.fn, dict(pre), ctx.instance + (s.site, tag))
            try:
                r = self.body(list(stmts) + rest, actx)
            finally:
                self.region = saved
            results.append((region, {STATE: actx.env[STATE]}))
            rets.append((region, r))
        env = self.merge_envs(pre, results)
        ctx.env.clear()
        ctx.env.update(pre)
        ctx.env[STATE] = env[STATE]
        (rt, vt), (rf, vf) = rets
        m = self.add_raw("Merge", {}, [self.local(vt.ref, rt), self.local(vf.ref, rf)], self.region)
        return Val((m, 0), _join_kind(vt.kind, vf.kind))

    # -- loops -------------------------------------------------------------------------

    def _check_loop(self, s):
        if A.contains(s.body, (A.Break, A.Continue, A.Return, A.FnDef)):
            raise Unconvertible("break, continue, return or fn inside a compiled loop")

    def _trips(self, site) -> int | None:
        gen = self.gen
        if not gen.opts.unroll or gen.dropped(site, "trip_count"):
            return None
        n = gen.facts.trip(site)
        if n is None or n > gen.opts.max_unroll:
            return None
        return n

    def while_(self, s, ctx):
        self._check_loop(s)
        n = self._trips(s.site)
        if n is not None:
            cp = self.checkpoint(ctx)
            try:
                if self._unroll_while(s, n, ctx):
                    return
            except Unconvertible as e:
                if "node budget" not in str(e):
                    raise
            self.rollback(cp, ctx)
        self.dyn_loop(s, ctx)

    def _unroll_while(self, s, n, ctx) -> bool:
        budget = self.gen.opts.node_budget // 2
        for i in range(n + 1):
            ictx = ctx.fork(s.site, i)
            pred = self.pred(s.cond, ictx)
            want = i < n
            if pred.const is True or pred.const is False:
                if pred.const is not want:
                    return False
            else:
                a = Assumption(s.site, TripCount(n), RUNTIME, ictx.instance)
                self.emit_assert(pred.ref, a, "EqArm", want)
            if want:
                self.block(s.body, ictx)
            if self.g.next_id > budget:
                return False
        return True

    def _range_arg(self, it):
        if (type(it) is A.Call and type(it.func) is A.Name and it.func.scope == A.BUILTIN
                and it.func.name == "range" and len(it.args) == 1):
            return it.args[0]
        return None

    def for_(self, s, ctx):
        self._check_loop(s)
        n = self._trips(s.site)
        if n is not None:
            cp = self.checkpoint(ctx)
            try:
                if self._unroll_for(s, n, ctx):
                    return
            except Unconvertible as e:
                if "node budget" not in str(e):
                    raise
            self.rollback(cp, ctx)
        self.dyn_loop(s, ctx)

    def _unroll_for(self, s, n, ctx) -> bool:
        budget = self.gen.opts.node_budget // 2
        rarg = self._range_arg(s.iter)
        a = Assumption(s.site, TripCount(n), RUNTIME, ctx.instance)
        if rarg is not None:
            count = self.expr(rarg, ctx)
            self.state_op(ctx, "Builtin", {"name": "range", "state": True}, [count.ref])
            if count.const is not NOCONST:
                if type(count.const) is not int or max(count.const, 0) != n:
                    return False
            else:
                self.emit_assert(count.ref, a, "EqInt", n)
            snap = None
        else:
            it = self.expr(s.iter, ctx)
            nid = self.state_op(ctx, "IterItems", {}, [it.ref])
            snap = (nid, 1)
            self.emit_assert((nid, 2), a, "EqInt", n)
        for i in range(n):
            ictx = ctx.fork(s.site, i)
            if snap is None:
                item = self.const(i)
            else:
                idx = self.const(i)
                ref = (self.add("IterItem", {}, [snap, idx.ref]), 0)
                item = self.site_value(s.site, ref, ictx)
            self.bind(s.var, s.scope, item, ictx)
            self.block(s.body, ictx)
            if self.g.next_id > budget:
                return False
        return True

    def dyn_loop(self, s, ctx):
        is_for = type(s) is A.ForIn
        # iteration pseudo-vars are keyed by loop site so nested loops do not collide
        snap_k, n_k, i_k = (f"%snap{s.site}", f"%n{s.site}", f"%i{s.site}")
        if is_for:
            it = self.expr(s.iter, ctx)
            nid = self.state_op(ctx, "IterItems", {}, [it.ref])
            ctx.env[snap_k] = Val((nid, 1))
            ctx.env[n_k] = Val((nid, 2), INT)
            ctx.env[i_k] = self.const(0)
        names = sorted(n for n in _loop_names(s) if n in ctx.env)
        names += [STATE, GLOBALS] + ([snap_k, n_k, i_k] if is_for else [])
        kinds = {n: ctx.env[n].kind for n in names}
        for _ in range(len(names) + 2):
            cp = self.checkpoint(ctx)
            end_kinds = self._dyn_loop_once(s, ctx, names, kinds, is_for)
            changed = [n for n in names if kinds[n] is not None and end_kinds[n] != kinds[n]]
            if not changed:
                break
            self.rollback(cp, ctx)
            for n in changed:
                kinds[n] = None
        else:
            raise Unconvertible("loop-carried kinds did not stabilize")
        if is_for:
            for k in (snap_k, n_k, i_k):
                ctx.env.pop(k, None)

    def _dyn_loop_once(self, s, ctx, names, kinds, is_for) -> dict:
        frame = f"{self.g.id}:L{s.site}.{self.frames}"
        self.frames += 1
        outer = self.region
        fr = Region("frame", outer)
        merges = {}
        for n in names:
            e = self.add_raw("Enter", {"frame": frame}, [self.local(ctx.env[n].ref, outer)], fr)
            merges[n] = self.add_raw("Merge", {"loop": True}, [(e, 0), (e, 0)], fr)
        fr.pivot = (merges[STATE], 0)
        self.region = fr
        snap_k, n_k, i_k = (f"%snap{s.site}", f"%n{s.site}", f"%i{s.site}")
        try:
            lctx = Ctx(ctx.fn, {n: Val((merges[n], 0), kinds[n]) for n in names}, ctx.instance + (s.site, "dyn"))
            if is_for:
                lt = self.add("BinOp", {"op": "<", "lk": INT, "rk": INT},
                              [lctx.env[i_k].ref, lctx.env[n_k].ref])
                pred = Val((lt, 0), BOOL)
            else:
                pred = self.pred(s.cond, lctx)
            lc = self.add("LoopCond", {}, [pred.ref])
            switches = {n: self.add("Switch", {"loop": True}, [(merges[n], 0), (lc, 0)]) for n in names}
            body = Region("arm", fr)
            self.region = body
            bvals = {}
            for n in names:
                idn = self.add_raw("Identity", {}, [(switches[n], 0)], body)
                bvals[n] = Val((idn, 0), kinds[n])
            body.pivot = bvals[STATE].ref
            bctx = Ctx(ctx.fn, dict(bvals), lctx.instance)
            if is_for:
                ref = (self.add("IterItem", {}, [bctx.env[snap_k].ref, bctx.env[i_k].ref]), 0)
                item = self.site_value(s.site, ref, bctx)
                self.bind(s.var, s.scope, item, bctx)
            self.block(s.body, bctx)
            if is_for:
                one = self.const(1)
                inc = self.add("BinOp", {"op": "+", "lk": INT, "rk": INT}, [bctx.env[i_k].ref, one.ref])
                bctx.env[i_k] = Val((inc, 0), INT)
            end_kinds = {}
            for n in names:
                v = bctx.env.get(n)
                if v is None:
                    raise Unconvertible(f"loop-carried '{n}' unbound at end of body")
                ni = self.add("NextIteration", {}, [v.ref])
                self.g.nodes[merges[n]].inputs[1] = (ni, 0)
                end_kinds[n] = v.kind
        finally:
            self.region = outer
        for n in names:
            x = self.add_raw("Exit", {}, [(switches[n], 1)], outer)
            ctx.env[n] = Val((x, 0), kinds[n])
        return end_kinds

    # -- expressions -------------------------------------------------------------------

    def expr(self, e, ctx) -> Val:
        t = type(e)
        if t is A.Literal:
            return self.const(e.value)
        if t is A.Name:
            return self.name(e, ctx)
        if t is A.BinOp:
            if e.op in ("and", "or"):
                return self.logical(e, ctx)
            a = self.expr(e.left, ctx)
            b = self.expr(e.right, ctx)
            attrs = {"op": e.op}
            if a.kind:
                attrs["lk"] = a.kind
            if b.kind:
                attrs["rk"] = b.kind
            nid = self.add("BinOp", attrs, [a.ref, b.ref])
            return Val((nid, 0), ops.binop_result_kind(e.op, a.kind, b.kind))
        if t is A.UnOp:
            v = self.expr(e.operand, ctx)
            nid = self.add("UnOp", {"op": e.op}, [v.ref])
            return Val((nid, 0), ops.unop_result_kind(e.op, v.kind))
        if t is A.Call:
            return self.call(e, ctx)
        if t is A.AttrGet:
            obj = self.expr(e.obj, ctx)
            nid = self.state_op(ctx, "GetAttr", {"name": e.name}, [obj.ref])
            return self.site_value(e.site, (nid, 1), ctx)
        if t is A.SubscrGet:
            obj = self.expr(e.obj, ctx)
            idx = self.expr(e.index, ctx)
            nid = self.state_op(ctx, "GetSubscr", {}, [obj.ref, idx.ref])
            return self.site_value(e.site, (nid, 1), ctx)
        if t is A.ListLit:
            items = [self.expr(i, ctx).ref for i in e.items]
            nid = self.state_op(ctx, "ListMake", {"n": len(items)}, items)
            return Val((nid, 1), LIST)
        if t is A.RecordLit:
            vals = [self.expr(f.value, ctx).ref for f in e.fields]
            nid = self.state_op(ctx, "RecordMake", {"names": tuple(f.name for f in e.fields)}, vals)
            return Val((nid, 1), RECORD)
        raise Unconvertible(f"unsupported expression {t.__name__}")

    def name(self, e, ctx) -> Val:
        if e.scope in (A.LOCAL, A.PARAM):
            v = ctx.env.get(e.name)
            if v is None:
                raise Unconvertible(f"'{e.name}' may be unbound here")
            return v
        if e.scope == A.GLOBAL:
            nid = self.state_op(ctx, "GetAttr", {"name": e.name}, [ctx.env[GLOBALS].ref])
            return self.site_value(e.site, (nid, 1), ctx)
        raise Unconvertible(f"name '{e.name}' with scope {e.scope}")

    def logical(self, e, ctx) -> Val:
        left = self.pred(e.left, ctx)
        rhs_arm = e.op == "and"  # left value for which the right side is evaluated
        arm = self.decide(e.site, left, ctx, then_value=rhs_arm)
        if arm is not None:
            # arm True means the right-hand side was evaluated
            if arm:
                return self.pred(e.right, ctx)
            return self.const(not rhs_arm)
        pre = dict(ctx.env)
        regions = self.open_arms(left)
        # Switch out0 is the true side; the right side runs when left == rhs_arm
        order = [(regions[0], "t"), (regions[1], "f")]
        results = []
        vals = []
        for region, tag in order:
            saved = self.region
            self.region = region
            actx = Ctx(ctx.fn, dict(pre), ctx.instance + (e.site, tag))
            try:
                if (tag == "t") == rhs_arm:
                    v = self.pred(e.right, actx)
                else:
                    v = self.const(not rhs_arm)
            finally:
                self.region = saved
            results.append((region, {STATE: actx.env[STATE]}))
            vals.append((region, v))
        env = self.merge_envs(pre, results)
        ctx.env[STATE] = env[STATE]
        (rt, vt), (rf, vf) = vals
        m = self.add_raw("Merge", {}, [self.local(vt.ref, rt), self.local(vf.ref, rf)], self.region)
        return Val((m, 0), BOOL)

    # -- calls -----------------------------------------------------------------------------

    def call(self, e, ctx) -> Val:
        func = e.func
        if type(func) is A.Name and func.scope == A.BUILTIN:
            args = [self.expr(a, ctx) for a in e.args]
            return self.builtin(func.name, args, ctx)
        fn = None
        if type(func) is A.Name and func.scope == A.GLOBAL:
            fn = self.gen.directs.get(func.name)
        if fn is None:
            gen = self.gen
            fn_id = None if gen.dropped(e.site, "callee") else gen.facts.callee(e.site)
            if fn_id is None:
                raise Unconvertible("callee is not stable")
            callee = self.expr(func, ctx)
            a = Assumption(e.site, CalleeStable(fn_id), RUNTIME, ctx.instance)
            self.emit_assert(callee.ref, a, "RefEq", fn_id)
            fn = gen.program.functions[fn_id]
        args = [self.expr(a, ctx) for a in e.args]
        if fn.captures:
            raise Unconvertible(f"callee {fn.name} captures enclosing variables")
        if len(args) != len(fn.params):
            raise Unconvertible(f"arity mismatch calling {fn.name}")
        if fn.site in self.inline_stack or len(self.inline_stack) > self.gen.opts.inline_depth:
            return self.invoke(fn, args, e, ctx)
        cenv = {p.name: v for p, v in zip(fn.params, args)}
        cenv[STATE] = ctx.env[STATE]
        cenv[GLOBALS] = ctx.env[GLOBALS]
        cctx = Ctx(fn, cenv, ctx.instance + ("c", e.site))
        self.inline_stack.append(fn.site)
        try:
            ret = self.body(fn.body, cctx)
        finally:
            self.inline_stack.pop()
        ctx.env[STATE] = cctx.env[STATE]
        return ret

    def invoke(self, fn, args, e, ctx) -> Val:
        sid = self.gen.subgraph_for(fn)
        inputs = [v.ref for v in args] + [ctx.env[GLOBALS].ref]
        nid = self.state_op(ctx, "Invoke", {"target": sid, "depth": len(self.inline_stack)}, inputs)
        return self.site_value(e.site, (nid, 1), ctx)

    def builtin(self, name, args: list[Val], ctx) -> Val:
        kinds = [a.kind for a in args]
        refs = [a.ref for a in args]
        if name in ops.PURE_BUILTINS:
            nid = self.add("Builtin", {"name": name}, refs)
            return Val((nid, 0), ops.builtin_result_kind(name, kinds))
        if name in ops.READ_BUILTINS:
            rk = ops.builtin_result_kind(name, kinds)
            if name == "tensor" and len(args) == 1:
                nid = self.state_op(ctx, "TensorFromList", {}, refs)
                return Val((nid, 1), rk)
            if all(k is not None and k != LIST for k in kinds):
                nid = self.add("Builtin", {"name": name}, refs)
                return Val((nid, 0), rk)
            nid = self.state_op(ctx, "Builtin", {"name": name, "state": True}, refs)
            return Val((nid, 1), rk)
        if name in ops.ALLOC_BUILTINS:
            nid = self.state_op(ctx, "Builtin", {"name": name, "state": True}, refs)
            return Val((nid, 1), LIST)
        if name == "append":
            if len(args) != 2:
                raise Unconvertible("append arity")
            self.state_op(ctx, "ListAppend", {}, refs)
            return self.const(None)
        if name == "print":
            self.state_op(ctx, "Print", {}, refs)
            return self.const(None)
        raise Unconvertible(f"builtin {name} is not supported in graphs")


def generate(program: A.Program, fn: A.FnDef, facts, param_specs: list[ValueSpec],
             options: GenOptions | None = None, overrides: dict | None = None,
             directs: dict | None = None) -> tuple[Graph, AssumptionSet]:
    """Build the (unoptimized) graph for ``fn`` under ``facts``."""
    gen = Generator(program, facts, options, overrides, directs)
    return gen.generate(fn, param_specs)


__all__ = ["GenOptions", "Generator", "direct_functions", "generate"]
