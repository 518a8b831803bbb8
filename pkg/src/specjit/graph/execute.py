"""Graph execution with deferred effects and all-or-nothing commit.

Two engines share one set of node kernels:

* a straight-line engine that compiles a frame-free graph into a Python
  function (topological order, node-id tie-break), used whenever a graph has
  no loop frames and no parallel work to overlap;
* a tagged-token dataflow engine that handles loop frames and, with
  ``workers > 1``, evaluates heavy pure nodes on a thread pool.

Heap effects go into a private :class:`State` (overlay copies plus an effect
log). Only a run that finishes without a failed Assert or a runtime error is
committed; anything else leaves the heap and transcript untouched.
"""

from __future__ import annotations

import os
import threading
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

from specjit.assumptions import KIND, matches
from specjit.errors import ASSERT_STMT_FAILED, NESTING_LIMIT, TYPE_MISMATCH, SLRuntimeError
from specjit.graph.ir import FRAME_KINDS, Graph, out_arity
from specjit.runtime import ops
from specjit.runtime.values import (
    BOOL, FLOAT, INT, FnRef, ListObj, RecordObj, RecordRef, kind_of, same_value, wrap_int,
)

FAIL_ENV = "SPECJIT_FAIL_ASSERT"
MAX_FRAME_DEPTH = 32
MAX_INVOKE_DEPTH = 150
# Graph calls stop this many levels short of the interpreter's call limit, so
# inlined calls can never get past a limit the interpreter would hit.
DEPTH_MARGIN = 10
HEAVY_BUILTINS = frozenset({"matmul", "sum", "mean", "tanh", "relu", "exp"})

# Test instrumentation: builtin name -> seconds slept before the kernel runs.
BUILTIN_DELAYS: dict[str, float] = {}


@contextmanager
def delayed_builtins(delays: dict[str, float]):
    old = dict(BUILTIN_DELAYS)
    BUILTIN_DELAYS.update(delays)
    try:
        yield
    finally:
        BUILTIN_DELAYS.clear()
        BUILTIN_DELAYS.update(old)


class _Dead:
    __slots__ = ()

    def __repr__(self):
        return "DEAD"


DEAD = _Dead()
_LIVE = True


class AssumptionFailed(Exception):
    def __init__(self, assumption_id: str, observed):
        self.assumption_id = assumption_id
        self.observed = observed
        super().__init__(f"assumption {assumption_id} failed on {observed!r}")


@dataclass
class Committed:
    value: Any
    effects: int = 0
    printed: str = ""


@dataclass
class Aborted:
    assumption_id: str | None
    observed: Any = None
    error: SLRuntimeError | None = None

    @property
    def is_error(self) -> bool:
        return self.error is not None


# -- deferred state ----------------------------------------------------------------

class State:
    """Private view of the heap for one graph run.

    The token is threaded linearly through every state node, so it can be
    mutated in place: the dataflow edges already serialize all accesses.
    """

    __slots__ = ("heap", "overlay", "log", "next_id", "effects")

    def __init__(self, heap):
        self.heap = heap
        self.overlay: dict[int, Any] = {}
        self.log: list[tuple] = []
        self.next_id = heap.next_id
        self.effects = 0

    def get_obj(self, hid):
        obj = self.overlay.get(hid)
        return obj if obj is not None else self.heap.entries[hid]

    def items_of(self, ref):
        return self.get_obj(ref.id).items

    def fields_of(self, ref):
        return self.get_obj(ref.id).fields

    def _writable(self, hid):
        obj = self.overlay.get(hid)
        if obj is None:
            obj = self.overlay[hid] = self.heap.entries[hid].copy()
        return obj

    def alloc_list(self, items):
        from specjit.runtime.values import ListRef

        hid = self.next_id
        self.next_id += 1
        items = list(items)
        self.overlay[hid] = ListObj(items)
        self.log.append(("alloc_list", hid, tuple(items)))
        return ListRef(hid)

    def alloc_record(self, fields: dict):
        hid = self.next_id
        self.next_id += 1
        self.overlay[hid] = RecordObj(fields)
        self.log.append(("alloc_record", hid, tuple(fields.items())))
        return RecordRef(hid)

    def set_attr(self, hid, name, value):
        self._writable(hid).fields[name] = value
        self.log.append(("set_attr", hid, name, value))
        self.effects += 1

    def set_item(self, hid, index, value):
        self._writable(hid).items[index] = value
        self.log.append(("set_item", hid, index, value))
        self.effects += 1

    def append(self, hid, value):
        self._writable(hid).items.append(value)
        self.log.append(("append", hid, value))
        self.effects += 1

    def print(self, text):
        self.log.append(("print", text))
        self.effects += 1

    def commit(self, out: list[str]) -> str:
        """Replay the effect log onto the real heap in program order."""
        heap = self.heap
        printed = []
        for ev in self.log:
            tag = ev[0]
            if tag == "set_attr":
                heap.entries[ev[1]].fields[ev[2]] = ev[3]
            elif tag == "append":
                heap.entries[ev[1]].items.append(ev[2])
            elif tag == "set_item":
                heap.entries[ev[1]].items[ev[2]] = ev[3]
            elif tag == "print":
                out.append(ev[1])
                printed.append(ev[1])
            elif tag == "alloc_list":
                heap.entries[ev[1]] = ListObj(ev[2])
            else:
                heap.entries[ev[1]] = RecordObj(dict(ev[2]))
        heap.next_id = self.next_id
        return "".join(printed)


# -- kernels -------------------------------------------------------------------------

def _no_items(ref):
    raise SLRuntimeError(TYPE_MISMATCH, "list operand where a non-list was proven")


UNARY = ops.UNOP_FUNCS


def _delay(name):
    d = BUILTIN_DELAYS.get(name)
    if d:
        time.sleep(d)


def assert_check(node, forced: str | None):
    """Predicate for an Assert node: returns True when the assumption holds."""
    a = node.attrs
    if forced is not None and a["assumption"] == forced:
        return lambda v: False
    comp, exp = a["comparator"], a["expected"]
    if comp == "EqInt":
        return lambda v: type(v) is int and v == exp
    if comp == "EqArm":
        return lambda v: v is exp
    if comp == "RefEq":
        return lambda v: type(v) is FnRef and v.fn.site == exp and not v.captures
    if comp == "ValueEq":
        return lambda v: same_value(v, exp)
    spec = exp
    return lambda v: matches(spec, v)


def make_kernel(node, executor: "Executor"):
    """Callable taking the node's input values and returning its output tuple."""
    kind = node.kind
    a = node.attrs
    if kind == "Const":
        value = a["value"]
        return lambda: (value,)
    if kind == "BinOp":
        f = ops.specialized_binop(a["op"], a.get("lk"), a.get("rk"))
        return lambda x, y: (f(x, y),)
    if kind == "UnOp":
        f = UNARY[a["op"]]
        return lambda x: (f(x),)
    if kind in ("Identity", "LoopCond", "Enter", "Exit", "NextIteration"):
        return lambda x: (x,)
    if kind == "Builtin":
        name = a["name"]
        if not a.get("state"):
            if name in ops.PURE_BUILTINS:
                def pure(*args):
                    _delay(name)
                    return (ops.call_pure_builtin(name, list(args)),)
                return pure

            def read_nolist(*args):
                _delay(name)
                return (ops.call_read_builtin(name, list(args), _no_items),)
            return read_nolist
        if name in ops.ALLOC_BUILTINS:
            def alloc(st, *args):
                _delay(name)
                return st, st.alloc_list(ops.alloc_builtin_items(name, list(args)))
            return alloc

        def read(st, *args):
            _delay(name)
            return st, ops.call_read_builtin(name, list(args), st.items_of)
        return read
    if kind == "TensorFromList":
        return lambda st, x: (st, ops.b_tensor(x, st.items_of))
    if kind == "ListMake":
        return lambda st, *items: (st, st.alloc_list(items))
    if kind == "RecordMake":
        names = tuple(a["names"])

        def record_make(st, *vals):
            fields = {}
            for k, v in zip(names, vals):
                fields[k] = v
            return st, st.alloc_record(fields)
        return record_make
    if kind == "GetAttr":
        name = a["name"]
        return lambda st, obj: (st, ops.get_attr(obj, name, st.fields_of))
    if kind == "SetAttr":
        name = a["name"]

        def set_attr(st, obj, value):
            ops.check_set_attr(obj)
            st.set_attr(obj.id, name, value)
            return (st,)
        return set_attr
    if kind == "GetSubscr":
        return lambda st, obj, idx: (st, ops.get_subscr(obj, idx, st.items_of))
    if kind == "SetSubscr":
        def set_subscr(st, obj, idx, value):
            ops.check_set_subscr(obj, idx, st.items_of)
            st.set_item(obj.id, idx, value)
            return (st,)
        return set_subscr
    if kind == "ListAppend":
        def append(st, lst, value):
            ops.check_append([lst, value])
            st.append(lst.id, value)
            return (st,)
        return append
    if kind == "Print":
        def print_(st, *args):
            st.print(ops.print_text(args, st.get_obj))
            return (st,)
        return print_
    if kind == "IterItems":
        def iter_items(st, value):
            items = tuple(ops.iteration_items(value, st.items_of))
            return st, items, len(items)
        return iter_items
    if kind == "IterItem":
        return lambda snap, i: (snap[i],)
    if kind == "Check":
        def check(v):
            if not ops.truth(v):
                raise SLRuntimeError(ASSERT_STMT_FAILED, "assertion failed")
            return ()
        return check
    if kind == "Invoke":
        target = a["target"]

        def invoke(st, *args):
            sub = executor.current_subgraphs[target]
            params, globals_ref = list(args[:-1]), args[-1]
            outs, st2 = executor.run_graph(sub, params, globals_ref, st)
            return st2, outs[0]
        return invoke
    raise ValueError(f"no kernel for {kind}")


def is_heavy(node) -> bool:
    if node.kind == "Invoke":
        return True
    if node.kind == "Builtin":
        name = node.attrs["name"]
        return name in HEAVY_BUILTINS or name in BUILTIN_DELAYS
    return False


def _switch_pred(p):
    if p is True or p is False:
        return p
    raise SLRuntimeError(TYPE_MISMATCH, f"condition must be Bool, got {kind_of(p)}")


# -- straight-line engine --------------------------------------------------------------

def topo_order(g: Graph) -> list[int]:
    import heapq

    indeg = {nid: 0 for nid in g.nodes}
    succ: dict[int, list[int]] = {nid: [] for nid in g.nodes}
    for n in g.nodes.values():
        # loop back edges (NextIteration -> Merge) are ignored
        preds = {src for src, _ in n.inputs
                 if not (n.kind == "Merge" and g.nodes[src].kind == "NextIteration")} | set(n.ctrl)
        for p in preds:
            succ[p].append(n.id)
        indeg[n.id] = len(preds)
    heap = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        nid = heapq.heappop(heap)
        order.append(nid)
        for s in succ[nid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, s)
    if len(order) != len(g.nodes):
        raise ValueError("graph has a cycle")
    return order


_INLINE_KIND_CHECK = {INT: "type({v}) is int", FLOAT: "type({v}) is float", BOOL: "type({v}) is bool"}


def compile_plan(g: Graph, executor: "Executor", forced: str | None):
    order = topo_order(g)
    nodes = g.nodes
    succ: dict[int, list[int]] = {nid: [] for nid in nodes}
    ctrl_succ: set[int] = set()
    for n in nodes.values():
        for src, _ in n.inputs:
            succ[src].append(n.id)
        for src in n.ctrl:
            succ[src].append(n.id)
            ctrl_succ.add(src)
    maybe_dead: set[int] = set()
    stack = [nid for nid, n in nodes.items() if n.kind == "Switch"]
    while stack:
        nid = stack.pop()
        for s in succ[nid]:
            if s not in maybe_dead:
                maybe_dead.add(s)
                stack.append(s)
    for nid, n in nodes.items():
        if n.kind == "Switch" and any(src in maybe_dead for src, _ in n.inputs):
            maybe_dead.add(nid)

    ns: dict[str, Any] = {"D": DEAD, "_w": wrap_int, "_tm": _switch_pred}
    lines = ["def plan(A):"]
    flagged = {nid for nid in ctrl_succ if nid in maybe_dead
               and (out_arity(nodes[nid]) == 0 or nodes[nid].kind == "Switch")}

    def out(src, k):
        return f"v{src}_{k}"

    def dead_of(src, k=None):
        if k is not None:
            return f"{out(src, k)} is D"
        if src in flagged:
            return f"x{src}"
        return f"{out(src, 0)} is D"

    for nid in order:
        n = nodes[nid]
        kind = n.kind
        ins = [out(s, k) for s, k in n.inputs]
        body: list[str] = []
        if kind == "Const":
            ns[f"C{nid}"] = n.attrs["value"]
            body.append(f"v{nid}_0 = C{nid}")
        elif kind == "Arg":
            body.append(f"v{nid}_0 = A[{_arg_slot(n, g)}]")
        elif kind == "BinOp":
            tmpl = ops.inline_template(n.attrs["op"], n.attrs.get("lk"), n.attrs.get("rk"))
            if tmpl is not None:
                body.append(f"v{nid}_0 = " + tmpl.format(a=ins[0], b=ins[1]))
            else:
                ns[f"F{nid}"] = ops.specialized_binop(n.attrs["op"], n.attrs.get("lk"), n.attrs.get("rk"))
                body.append(f"v{nid}_0 = F{nid}({ins[0]}, {ins[1]})")
        elif kind == "UnOp":
            ns[f"F{nid}"] = UNARY[n.attrs["op"]]
            body.append(f"v{nid}_0 = F{nid}({ins[0]})")
        elif kind in ("Identity", "LoopCond"):
            body.append(f"v{nid}_0 = {ins[0]}")
        elif kind == "Switch":
            d, p = ins
            body += [f"if {p} is True:", f"    v{nid}_0 = {d}; v{nid}_1 = D",
                     f"elif {p} is False:", f"    v{nid}_0 = D; v{nid}_1 = {d}",
                     "else:", f"    _tm({p})"]
        elif kind == "Merge":
            first = True
            for slot, src in enumerate(ins):
                kw = "if" if first else "elif"
                body += [f"{kw} {src} is not D:", f"    v{nid}_0 = {src}; v{nid}_1 = {slot}"]
                first = False
            body += ["else:", f"    v{nid}_0 = D; v{nid}_1 = D"]
        elif kind == "Assert":
            v = ins[0]
            ns[f"I{nid}"] = n.attrs["assumption"]
            cond = _inline_assert(n, v, ns, nid, forced)
            body += [f"if not ({cond}):", f"    _fail(I{nid}, {v})"]
        else:
            ns[f"K{nid}"] = make_kernel(n, executor)
            outs = [f"v{nid}_{k}" for k in range(out_arity(n))]
            call = f"K{nid}({', '.join(ins)})"
            if outs:
                body.append(f"{', '.join(outs)}{',' if len(outs) == 1 else ''} = {call}")
            else:
                body.append(call)
        if nid in maybe_dead and kind != "Merge":
            conds = [dead_of(s, k) for s, k in n.inputs if s in maybe_dead or nodes[s].kind == "Switch"]
            conds += [dead_of(s) for s in n.ctrl if s in maybe_dead]
            dead_outs = [f"v{nid}_{k} = D" for k in range(out_arity(n))]
            if nid in flagged:
                dead_outs.append(f"x{nid} = True")
                body.insert(0, f"x{nid} = False")
            if conds:
                lines.append(f"    if {' or '.join(conds)}:")
                lines.extend("        " + s for s in (dead_outs or ["pass"]))
                lines.append("    else:")
                lines.extend("        " + s for s in body)
                continue
        lines.extend("    " + s for s in body)
    rets = [out(s, k) for s, k in g.outputs]
    st = out(*g.state_output) if g.state_output else "None"
    lines.append(f"    return ({', '.join(rets)}{',' if len(rets) == 1 else ''}), {st}")
    ns["_fail"] = _raise_failed
    src = "\n".join(lines) + "\n"
    exec(compile(src, f"<plan {g.id}>", "exec"), ns)
    fn = ns["plan"]
    fn.source = src
    return fn


def _raise_failed(aid, v):
    raise AssumptionFailed(aid, v)


def _inline_assert(n, v, ns, nid, forced):
    a = n.attrs
    if forced is not None and a["assumption"] == forced:
        return "False"
    comp, exp = a["comparator"], a["expected"]
    if comp == "EqArm":
        return f"{v} is {exp!r}"
    if comp == "EqInt":
        return f"type({v}) is int and {v} == {int(exp)}"
    if comp == "ShapeMatch" and exp.level == KIND and exp.kind in _INLINE_KIND_CHECK:
        return _INLINE_KIND_CHECK[exp.kind].format(v=v)
    ns[f"P{nid}"] = assert_check(n, None)
    return f"P{nid}({v})"


def _arg_slot(n, g: Graph) -> int:
    role = n.attrs.get("role")
    if role == "globals":
        return g.n_params
    if role == "state":
        return g.n_params + 1
    return n.attrs["index"]


# -- tagged-token engine -------------------------------------------------------------

_worker = threading.local()


class TaggedProgram:
    def __init__(self, g: Graph, executor: "Executor", forced: str | None):
        self.g = g
        nodes = g.nodes
        self.kind = {nid: n.kind for nid, n in nodes.items()}
        self.n_in = {nid: len(n.inputs) + len(n.ctrl) for nid, n in nodes.items()}
        self.n_data = {nid: len(n.inputs) for nid, n in nodes.items()}
        self.n_out = {nid: out_arity(n) for nid, n in nodes.items()}
        self.loop = {nid: bool(n.attrs.get("loop")) for nid, n in nodes.items()}
        self.frame = {nid: n.attrs.get("frame") for nid, n in nodes.items()}
        self.heavy = {nid for nid, n in nodes.items() if is_heavy(n)}
        self.succ: dict[tuple, list] = {}
        self.ctrl_succ: dict[int, list] = {nid: [] for nid in nodes}
        for n in nodes.values():
            for slot, (src, k) in enumerate(n.inputs):
                self.succ.setdefault((src, k), []).append((n.id, slot))
            for src in n.ctrl:
                self.ctrl_succ[src].append(n.id)
        self.sources = sorted(nid for nid, n in nodes.items() if not n.inputs and not n.ctrl)
        self.kernels = {}
        for nid, n in nodes.items():
            if n.kind == "Assert":
                self.kernels[nid] = (n.attrs["assumption"], assert_check(n, forced))
            elif n.kind not in ("Arg", "Switch", "Merge"):
                self.kernels[nid] = make_kernel(n, executor)
        self.outputs = list(g.outputs)
        self.state_output = g.state_output


def run_tagged(prog: TaggedProgram, args: list, pool: ThreadPoolExecutor | None):
    kind = prog.kind
    succ = prog.succ
    ctrl_succ = prog.ctrl_succ
    n_in = prog.n_in
    pending: dict[tuple, list] = {}
    merges_done: set = set()
    merge_dead: dict[tuple, int] = {}
    ready: deque = deque()
    results: dict[tuple, Any] = {}
    wanted = set(prog.outputs)
    if prog.state_output:
        wanted.add(prog.state_output)

    def deliver(cid, slot, tag, val):
        key = (cid, tag)
        if kind[cid] == "Merge":
            if key in merges_done:
                return
            if val is not DEAD:
                merges_done.add(key)
                ready.append((cid, tag, (val, slot), False))
            elif prog.loop[cid]:
                merges_done.add(key)
                ready.append((cid, tag, None, True))
            else:
                cnt = merge_dead.get(key, 0) + 1
                merge_dead[key] = cnt
                if cnt == prog.n_data[cid]:
                    merges_done.add(key)
                    ready.append((cid, tag, None, True))
            return
        entry = pending.get(key)
        if entry is None:
            entry = pending[key] = [[None] * prog.n_data[cid], n_in[cid], False]
        if val is DEAD:
            entry[2] = True
        if slot >= 0:
            entry[0][slot] = val
        entry[1] -= 1
        if entry[1] == 0:
            del pending[key]
            ready.append((cid, tag, entry[0], entry[2]))

    def emit(nid, tag, outs, dead):
        if not tag:
            for k in range(len(outs)):
                if (nid, k) in wanted:
                    results[(nid, k)] = outs[k]
        for k, val in enumerate(outs):
            for cid, slot in succ.get((nid, k), ()):
                deliver(cid, slot, tag, val)
        token = DEAD if dead else _LIVE
        for cid in ctrl_succ[nid]:
            deliver(cid, -1, tag, token)

    def fire(nid, tag, vals, dead):
        k = kind[nid]
        if k == "Switch":
            if dead:
                emit(nid, tag, (DEAD, DEAD), True)
                return
            data, pred = vals
            if pred is DEAD:
                emit(nid, tag, (DEAD, DEAD), True)
                return
            pred = _switch_pred(pred)
            if prog.loop[nid]:
                k_out = 0 if pred else 1
                for cid, slot in succ.get((nid, k_out), ()):
                    deliver(cid, slot, tag, data)
                if not tag:
                    if (nid, k_out) in wanted:
                        results[(nid, k_out)] = data
                for cid in ctrl_succ[nid]:
                    deliver(cid, -1, tag, _LIVE)
                return
            emit(nid, tag, (data, DEAD) if pred else (DEAD, data), False)
            return
        if k == "Merge":
            emit(nid, tag, (DEAD, DEAD) if dead else vals, dead)
            return
        if k == "Enter":
            if len(tag) >= MAX_FRAME_DEPTH:
                raise SLRuntimeError(NESTING_LIMIT, f"loop nesting exceeds {MAX_FRAME_DEPTH}")
            emit(nid, tag + ((prog.frame[nid], 0),), (DEAD,) if dead else (vals[0],), dead)
            return
        if k == "Exit":
            emit(nid, tag[:-1], (DEAD,) if dead else (vals[0],), dead)
            return
        if k == "NextIteration":
            if dead:
                return
            name, i = tag[-1]
            emit(nid, tag[:-1] + ((name, i + 1),), (vals[0],), False)
            return
        if dead:
            emit(nid, tag, (DEAD,) * prog.n_out[nid], True)
            return
        if k == "Arg":
            emit(nid, tag, (args[_arg_slot(prog.g.nodes[nid], prog.g)],), False)
            return
        if k == "Assert":
            aid, check = prog.kernels[nid]
            v = vals[0]
            if not check(v):
                raise AssumptionFailed(aid, v)
            emit(nid, tag, (), False)
            return
        emit(nid, tag, prog.kernels[nid](*vals), False)

    for nid in prog.sources:
        ready.append((nid, (), [], False))

    if pool is None:
        while ready:
            fire(*ready.popleft())
    else:
        inflight: dict = {}
        try:
            while ready or inflight:
                while ready:
                    item = ready.popleft()
                    nid, tag, vals, dead = item
                    if not dead and nid in prog.heavy:
                        inflight[pool.submit(_in_worker, prog.kernels[nid], vals)] = item
                    else:
                        fire(*item)
                if inflight:
                    done, _ = wait(list(inflight), return_when=FIRST_COMPLETED)
                    for fut in sorted(done, key=lambda f: inflight[f][0]):
                        nid, tag, _, _ = inflight.pop(fut)
                        emit(nid, tag, fut.result(), False)
        finally:
            if inflight:
                wait(list(inflight))

    outs = [results[o] for o in prog.outputs]
    st = results[prog.state_output] if prog.state_output else None
    return tuple(outs), st


def _in_worker(kernel, vals):
    _worker.active = True
    try:
        return kernel(*vals)
    finally:
        _worker.active = False


# -- executor --------------------------------------------------------------------------

def has_frames(g: Graph) -> bool:
    return any(n.kind in FRAME_KINDS for n in g.nodes.values())


class Executor:
    """Runs graphs against a heap. One execute() call owns the heap."""

    def __init__(self, workers: int = 1, audit: bool = False):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self.audit = audit
        self._pool: ThreadPoolExecutor | None = None
        self._base_depth = 0
        self._depth = 0
        self.current_subgraphs: dict[str, Graph] = {}
        self.engine_counts = {"plan": 0, "tagged": 0, "parallel": 0}

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _get_pool(self):
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="specjit")
        return self._pool

    @staticmethod
    def forced_failure() -> str | None:
        return os.environ.get(FAIL_ENV) or None

    def _program(self, g: Graph, engine: str, forced):
        cache = g.__dict__.setdefault("_exec_cache", {})
        key = (id(self), engine, forced)
        prog = cache.get(key)
        if prog is None:
            if engine == "plan":
                prog = compile_plan(g, self, forced)
            else:
                prog = TaggedProgram(g, self, forced)
            cache[key] = prog
        return prog

    @staticmethod
    def _facts(g: Graph) -> tuple[bool, bool]:
        """(has frames, has heavy nodes), computed once per graph."""
        cache = g.__dict__.setdefault("_exec_cache", {})
        facts = cache.get("facts")
        if facts is None:
            facts = cache["facts"] = (has_frames(g), any(is_heavy(n) for n in g.nodes.values()))
        return facts

    def _wants_parallel(self, g: Graph) -> bool:
        if self.workers <= 1 or getattr(_worker, "active", False) or self._depth > 0:
            return False
        # delays can be switched on after the graph was first seen
        return self._facts(g)[1] or (bool(BUILTIN_DELAYS) and any(is_heavy(n) for n in g.nodes.values()))

    def run_graph(self, g: Graph, params: list, globals_ref, state: State, parallel: bool = False):
        """Evaluate ``g`` (no commit). Returns (outputs, state token)."""
        forced = self.forced_failure()
        args = list(params) + [globals_ref, state]
        if self._base_depth + self._depth + DEPTH_MARGIN >= MAX_INVOKE_DEPTH:
            raise SLRuntimeError(NESTING_LIMIT, f"call depth exceeds {MAX_INVOKE_DEPTH}")
        self._depth += 1
        try:
            if parallel:
                self.engine_counts["parallel"] += 1
                prog = self._program(g, "tagged", forced)
                outs, st = run_tagged(prog, args, self._get_pool())
            elif self._facts(g)[0]:
                self.engine_counts["tagged"] += 1
                outs, st = run_tagged(self._program(g, "tagged", forced), args, None)
            else:
                self.engine_counts["plan"] += 1
                outs, st = self._program(g, "plan", forced)(args)
        finally:
            self._depth -= 1
        return outs, (st if st is not None else state)

    def execute(self, g: Graph, params: list, heap, out: list[str], depth: int = 0):
        """Run ``g`` and commit its effects if every assumption holds.

        ``depth`` is the caller's interpreter call depth.
        """
        self.current_subgraphs = g.subgraphs
        self._base_depth = depth
        self._depth = 0
        before = heap.snapshot() if self.audit else None
        out_len = len(out)
        parallel = self._wants_parallel(g)
        try:
            try:
                state = State(heap)
                outs, st = self.run_graph(g, params, heap.globals_ref, state, parallel)
            except (AssumptionFailed, SLRuntimeError):
                if not parallel:
                    raise
                # re-run serially so the reported failure does not depend on timing
                state = State(heap)
                outs, st = self.run_graph(g, params, heap.globals_ref, state, False)
        except AssumptionFailed as e:
            self._audit(before, heap, out, out_len)
            return Aborted(e.assumption_id, e.observed)
        except SLRuntimeError as e:
            self._audit(before, heap, out, out_len)
            return Aborted(None, None, e)
        except RecursionError:
            self._audit(before, heap, out, out_len)
            return Aborted(None, None, SLRuntimeError(NESTING_LIMIT, "recursion too deep"))
        printed = st.commit(out) if g.state_output else ""
        return Committed(outs[0] if outs else None, st.effects, printed)

    def _audit(self, before, heap, out, out_len):
        if before is not None:
            if heap.snapshot() != before or len(out) != out_len:
                raise AssertionError("aborted graph run modified the heap or transcript")
