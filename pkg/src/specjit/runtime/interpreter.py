"""Tree-walking executor: the profiling path, the fallback path and the oracle.

Effects are applied to the heap immediately. When a profiling sink is
attached, branch arms, loop trip counts, value observations and callees are
reported to it. When a call hook is attached, every call to a user function
is routed through it (the orchestrator uses this to dispatch to graphs).
"""

from __future__ import annotations

import sys
from typing import Any, Callable

from specjit.errors import (
    ARITY_MISMATCH, ASSERT_STMT_FAILED, NESTING_LIMIT, TYPE_MISMATCH, UNBOUND_VARIABLE,
    SLRuntimeError,
)
from specjit.frontend import ast as A
from specjit.runtime import ops
from specjit.runtime.values import FnRef, Heap, ListRef, kind_of

NORMAL, BREAK, CONTINUE, RETURN = 0, 1, 2, 3

MAX_CALL_DEPTH = 150


def _ensure_recursion_limit():
    if sys.getrecursionlimit() < 20000:
        sys.setrecursionlimit(20000)


class Frame:
    __slots__ = ("env", "fnref", "ret")

    def __init__(self, env, fnref):
        self.env = env
        self.fnref = fnref
        self.ret = None


def loop_assigned_names(loop) -> list[str]:
    """Variables assigned in a loop body (cached on the node), in first-seen order."""
    names = getattr(loop, "_assigned", None)
    if names is None:
        seen: dict[str, None] = {}
        if isinstance(loop, A.ForIn):
            seen[loop.var] = None
        stack = list(reversed(loop.body))
        while stack:
            node = stack.pop()
            if isinstance(node, (A.Let, A.Assign)):
                seen.setdefault(node.name, None)
            elif isinstance(node, A.ForIn):
                seen.setdefault(node.var, None)
            elif isinstance(node, A.FnDef):
                seen.setdefault(node.name, None)
                continue
            stack.extend(reversed(list(A.children(node))))
        names = list(seen)
        loop._assigned = names
    return names


class Interpreter:
    def __init__(self, program: A.Program, heap: Heap | None = None, out: list[str] | None = None,
                 sink=None, call_hook: Callable[[FnRef, list], Any] | None = None):
        _ensure_recursion_limit()
        self.program = program
        self.heap = heap if heap is not None else Heap()
        self.out = out if out is not None else []
        self.sink = sink
        self.call_hook = call_hook
        self.depth = 0
        self._stmt = {
            A.Let: self._bind_stmt, A.Assign: self._bind_stmt, A.ExprStmt: self._expr_stmt,
            A.If: self._if, A.While: self._while, A.ForIn: self._for, A.Return: self._return,
            A.Break: self._break, A.Continue: self._continue, A.Assert: self._assert,
            A.AttrAssign: self._attr_assign, A.SubscrAssign: self._subscr_assign,
            A.GlobalDecl: self._noop, A.FnDef: self._fndef,
        }
        self._expr = {
            A.Literal: self._literal, A.Name: self._name, A.BinOp: self._binop,
            A.UnOp: self._unop, A.Call: self._call, A.AttrGet: self._attr_get,
            A.SubscrGet: self._subscr_get, A.ListLit: self._list_lit, A.RecordLit: self._record_lit,
        }

    # -- heap access helpers -------------------------------------------------

    def items_of(self, ref: ListRef) -> list:
        return self.heap.entries[ref.id].items

    def fields_of(self, ref) -> dict:
        return self.heap.entries[ref.id].fields

    def get_obj(self, hid: int):
        return self.heap.entries[hid]

    # -- entry points ------------------------------------------------------------

    def run_program(self):
        """Execute the top-level statements."""
        frame = Frame(None, None)
        self.exec_block(self.program.body, frame)

    def call_value(self, callee, args: list, site: int | None = None):
        if type(callee) is not FnRef:
            raise SLRuntimeError(TYPE_MISMATCH, f"cannot call a value of kind {kind_of(callee)}")
        if self.sink is not None and site is not None:
            self.sink.callee(site, callee.fn_id)
        if self.call_hook is not None:
            return self.call_hook(callee, args)
        return self.call_function(callee, args)

    def call_function(self, fnref: FnRef, args: list):
        """Interpret one call of a user function (no dispatch)."""
        fn = fnref.fn
        if len(args) != len(fn.params):
            raise SLRuntimeError(ARITY_MISMATCH,
                                 f"{fn.name} takes {len(fn.params)} argument(s), got {len(args)}", fn.span)
        if self.depth >= MAX_CALL_DEPTH:
            raise SLRuntimeError(NESTING_LIMIT, f"call depth exceeds {MAX_CALL_DEPTH}", fn.span)
        sink = self.sink
        if sink is not None:
            sink.call(fn.site, args)
            for p, a in zip(fn.params, args):
                sink.value(p.site, a)
        env = {p.name: a for p, a in zip(fn.params, args)}
        frame = Frame(env, fnref)
        self.depth += 1
        try:
            status = self.exec_block(fn.body, frame)
        finally:
            self.depth -= 1
        return frame.ret if status == RETURN else None

    # -- statements -----------------------------------------------------------

    def exec_block(self, stmts, frame) -> int:
        table = self._stmt
        for stmt in stmts:
            try:
                status = table[type(stmt)](stmt, frame)
            except SLRuntimeError as e:
                raise e.with_span(stmt.span)
            if status:
                return status
        return NORMAL

    def _noop(self, node, frame):
        return NORMAL

    def _store(self, name, scope, value, frame):
        if scope == A.GLOBAL or frame.env is None:
            self.heap.entries[0].fields[name] = value
        else:
            frame.env[name] = value

    def _bind_stmt(self, node, frame):
        value = self._expr[type(node.value)](node.value, frame)
        self._store(node.name, node.scope, value, frame)
        return NORMAL

    def _expr_stmt(self, node, frame):
        self._expr[type(node.expr)](node.expr, frame)
        return NORMAL

    def _if(self, node, frame):
        cond = ops.truth(self.eval(node.cond, frame))
        if self.sink is not None:
            self.sink.branch(node.site, "then" if cond else "else")
        if cond:
            return self.exec_block(node.then, frame)
        if node.orelse is not None:
            return self.exec_block(node.orelse, frame)
        return NORMAL

    def _observe_carried(self, node, frame):
        sink = self.sink
        env = frame.env
        if env is None:
            return
        for name in loop_assigned_names(node):
            if name in env:
                sink.value((node.site, name), env[name])

    def _while(self, node, frame):
        sink = self.sink
        if sink is not None:
            self._observe_carried(node, frame)
        trips = 0
        cond_node = node.cond
        body = node.body
        status = NORMAL
        while ops.truth(self.eval(cond_node, frame)):
            trips += 1
            status = self.exec_block(body, frame)
            if status == BREAK:
                status = NORMAL
                break
            if status == RETURN:
                break
            status = NORMAL
        if sink is not None:
            sink.trips(node.site, trips)
        return status

    def _for(self, node, frame):
        sink = self.sink
        if sink is not None:
            self._observe_carried(node, frame)
        items = ops.iteration_items(self.eval(node.iter, frame), self.items_of)
        trips = 0
        status = NORMAL
        for item in items:
            trips += 1
            if sink is not None:
                sink.value(node.site, item)
            self._store(node.var, node.scope, item, frame)
            status = self.exec_block(node.body, frame)
            if status == BREAK:
                status = NORMAL
                break
            if status == RETURN:
                break
            status = NORMAL
        if sink is not None:
            sink.trips(node.site, trips)
        return status

    def _return(self, node, frame):
        frame.ret = None if node.value is None else self.eval(node.value, frame)
        return RETURN

    def _break(self, node, frame):
        return BREAK

    def _continue(self, node, frame):
        return CONTINUE

    def _assert(self, node, frame):
        if not ops.truth(self.eval(node.cond, frame)):
            raise SLRuntimeError(ASSERT_STMT_FAILED, "assertion failed", node.span)
        return NORMAL

    def _attr_assign(self, node, frame):
        obj = self.eval(node.obj, frame)
        value = self.eval(node.value, frame)
        ops.check_set_attr(obj)
        self.heap.entries[obj.id].fields[node.name] = value
        return NORMAL

    def _subscr_assign(self, node, frame):
        obj = self.eval(node.obj, frame)
        index = self.eval(node.index, frame)
        value = self.eval(node.value, frame)
        ops.check_set_subscr(obj, index, self.items_of)
        self.heap.entries[obj.id].items[index] = value
        return NORMAL

    def _fndef(self, node, frame):
        ref = FnRef(node, {})
        for name in node.captures:
            if frame.env is not None and name in frame.env:
                ref.captures[name] = frame.env[name]
            elif frame.fnref is not None and name in frame.fnref.captures:
                ref.captures[name] = frame.fnref.captures[name]
            elif name == node.name:
                ref.captures[name] = ref
            else:
                raise SLRuntimeError(UNBOUND_VARIABLE, f"captured variable '{name}' is unbound", node.span)
        if frame.env is None or node.name in frame.fnref.fn.global_names:
            self.heap.entries[0].fields[node.name] = ref
        else:
            frame.env[node.name] = ref
        return NORMAL

    # -- expressions ----------------------------------------------------------

    def eval(self, node, frame):
        return self._expr[type(node)](node, frame)

    def _literal(self, node, frame):
        return node.value

    def _name(self, node, frame):
        scope = node.scope
        name = node.name
        if scope == A.LOCAL or scope == A.PARAM:
            if frame.env is not None:
                try:
                    return frame.env[name]
                except KeyError:
                    raise SLRuntimeError(UNBOUND_VARIABLE, f"'{name}' is unbound", node.span) from None
        elif scope == A.CAPTURE:
            return frame.fnref.captures[name]
        elif scope == A.BUILTIN:
            raise SLRuntimeError(TYPE_MISMATCH, f"builtin '{name}' is not a value", node.span)
        try:
            value = self.heap.entries[0].fields[name]
        except KeyError:
            raise SLRuntimeError(UNBOUND_VARIABLE, f"global '{name}' is unbound", node.span) from None
        if self.sink is not None and frame.env is not None:
            self.sink.value(node.site, value)
        return value

    def _binop(self, node, frame):
        op = node.op
        if op == "and" or op == "or":
            left = ops.truth(self.eval(node.left, frame))
            take_rhs = left if op == "and" else not left
            if self.sink is not None:
                self.sink.branch(node.site, "then" if take_rhs else "else")
            if not take_rhs:
                return left
            return ops.truth(self.eval(node.right, frame))
        a = self._expr[type(node.left)](node.left, frame)
        b = self._expr[type(node.right)](node.right, frame)
        return ops.BINOP_FUNCS[op](a, b)

    def _unop(self, node, frame):
        return ops.UNOP_FUNCS[node.op](self.eval(node.operand, frame))

    def _call(self, node, frame):
        func = node.func
        if type(func) is A.Name and func.scope == A.BUILTIN:
            args = [self.eval(a, frame) for a in node.args]
            return self.call_builtin(func.name, args)
        callee = self.eval(func, frame)
        args = [self.eval(a, frame) for a in node.args]
        result = self.call_value(callee, args, node.site)
        if self.sink is not None:
            self.sink.value(node.site, result)
        return result

    def call_builtin(self, name, args):
        if name in ops.PURE_BUILTINS:
            return ops.call_pure_builtin(name, args)
        if name in ops.READ_BUILTINS:
            return ops.call_read_builtin(name, args, self.items_of)
        if name in ops.ALLOC_BUILTINS:
            return self.heap.alloc_list(ops.alloc_builtin_items(name, args))
        if name == "append":
            ops.check_append(args)
            self.heap.entries[args[0].id].items.append(args[1])
            return None
        if name == "print":
            self.out.append(ops.print_text(args, self.get_obj))
            return None
        ops.check_arity(name, len(args))
        raise AssertionError(name)

    def _attr_get(self, node, frame):
        value = ops.get_attr(self.eval(node.obj, frame), node.name, self.fields_of)
        if self.sink is not None:
            self.sink.value(node.site, value)
        return value

    def _subscr_get(self, node, frame):
        obj = self.eval(node.obj, frame)
        index = self.eval(node.index, frame)
        value = ops.get_subscr(obj, index, self.items_of)
        if self.sink is not None:
            self.sink.value(node.site, value)
        return value

    def _list_lit(self, node, frame):
        return self.heap.alloc_list([self.eval(i, frame) for i in node.items])

    def _record_lit(self, node, frame):
        fields = {}
        for f in node.fields:
            fields[f.name] = self.eval(f.value, frame)
        return self.heap.alloc_record(fields)


def run_source(source: str, sink=None) -> tuple[Interpreter, str]:
    """Parse, resolve and run a whole program imperatively."""
    from specjit.frontend import load

    interp = Interpreter(load(source), sink=sink)
    interp.run_program()
    return interp, "".join(interp.out)
