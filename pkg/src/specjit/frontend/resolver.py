"""Name resolution and static checks.

Scoping is per function (no block scopes). A name assigned anywhere in a
function body is local unless declared ``global`` before its first use.
Nested functions capture enclosing locals by value; assigning to one is an
error.
"""

from __future__ import annotations

from specjit.errors import ResolveError
from specjit.frontend import ast as A

BUILTINS = (
    "tensor", "zeros", "ones", "matmul", "sum", "mean", "tanh", "relu", "exp",
    "shape", "len", "range", "append", "print",
)
BUILTIN_SET = frozenset(BUILTINS)


class _Scope:
    def __init__(self, fn: A.FnDef | None, parent: "_Scope | None"):
        self.fn = fn
        self.parent = parent
        self.params: set[str] = set()
        self.locals: set[str] = set()
        self.globals: set[str] = set()

    def binds(self, name: str) -> bool:
        return name in self.params or name in self.locals


def _first_uses(stmts: list[A.AstNode]) -> dict[str, int]:
    """Pre-order position of each name's first mention (not entering nested fns)."""
    out: dict[str, int] = {}
    pos = 0
    stack = list(reversed(stmts))
    while stack:
        node = stack.pop()
        pos += 1
        name = None
        if isinstance(node, (A.Name, A.Let, A.Assign)):
            name = node.name
        elif isinstance(node, A.ForIn):
            name = node.var
        elif isinstance(node, A.FnDef):
            out.setdefault(node.name, pos)
            continue
        elif isinstance(node, A.GlobalDecl):
            out.setdefault("global " + node.name, pos)
            continue
        if name is not None:
            out.setdefault(name, pos)
        stack.extend(reversed(list(A.children(node))))
    return out


def _assigned_names(stmts: list[A.AstNode]) -> set[str]:
    names = set()
    stack = list(stmts)
    while stack:
        node = stack.pop()
        if isinstance(node, (A.Let, A.Assign)):
            names.add(node.name)
        elif isinstance(node, A.ForIn):
            names.add(node.var)
        elif isinstance(node, A.FnDef):
            names.add(node.name)
            continue
        stack.extend(A.children(node))
    return names


class Resolver:
    def __init__(self, program: A.Program):
        self.program = program
        self.toplevel_globals = _assigned_names(program.body)

    def run(self) -> A.Program:
        for name in sorted(self.toplevel_globals):
            if name in BUILTIN_SET:
                raise ResolveError(f"cannot rebind builtin '{name}'", None)
        self.block(self.program.body, None, loop_depth=0)
        return self.program

    # -- scopes ----------------------------------------------------------------

    def enter_function(self, fn: A.FnDef, parent: _Scope | None) -> _Scope:
        scope = _Scope(fn, parent)
        scope.params = {p.name for p in fn.params}
        uses = _first_uses(fn.body)
        for key, pos in uses.items():
            if key.startswith("global "):
                name = key[len("global "):]
                if name in scope.params:
                    raise ResolveError(f"'global {name}' names a parameter", fn.span)
                first = uses.get(name)
                if first is not None and first < pos:
                    raise ResolveError(f"name '{name}' used before its global declaration", fn.span)
                scope.globals.add(name)
        assigned = _assigned_names(fn.body)
        scope.locals = assigned - scope.globals - scope.params
        for name in scope.locals:
            if name in BUILTIN_SET:
                raise ResolveError(f"cannot rebind builtin '{name}'", fn.span)
            if parent is not None and self._enclosing_binding(parent, name):
                raise ResolveError(f"cannot assign to captured variable '{name}'", fn.span)
        fn.local_names = set(scope.locals)
        fn.global_names = set(scope.globals)
        fn.is_toplevel = parent is None
        return scope

    @staticmethod
    def _enclosing_binding(scope: _Scope | None, name: str) -> bool:
        while scope is not None:
            if name in scope.globals:
                return False
            if scope.binds(name):
                return True
            scope = scope.parent
        return False

    def lookup(self, scope: _Scope | None, name: str) -> str:
        if scope is None:
            return A.BUILTIN if name in BUILTIN_SET else A.GLOBAL
        if name in scope.params:
            return A.PARAM
        if name in scope.locals:
            return A.LOCAL
        if name in scope.globals:
            return A.GLOBAL
        if self._enclosing_binding(scope.parent, name):
            # record capture on every function between here and the binder
            cur = scope
            while cur is not None and not cur.binds(name):
                if name not in cur.fn.captures:
                    cur.fn.captures.append(name)
                cur = cur.parent
            return A.CAPTURE
        if name in BUILTIN_SET:
            return A.BUILTIN
        return A.GLOBAL

    def target_scope(self, scope: _Scope | None, name: str) -> str:
        if scope is None or name in scope.globals:
            return A.GLOBAL
        if name in scope.params:
            return A.PARAM
        return A.LOCAL

    # -- traversal -------------------------------------------------------------

    def block(self, stmts, scope, loop_depth):
        for stmt in stmts:
            self.stmt(stmt, scope, loop_depth)

    def stmt(self, node, scope, loop_depth):
        if isinstance(node, A.FnDef):
            inner = self.enter_function(node, scope)
            self.block(node.body, inner, 0)
            return
        if isinstance(node, (A.Break, A.Continue)):
            if loop_depth == 0:
                word = "break" if isinstance(node, A.Break) else "continue"
                raise ResolveError(f"'{word}' outside a loop", node.span)
            return
        if isinstance(node, A.Return):
            if scope is None:
                raise ResolveError("'return' outside a function", node.span)
            if node.value is not None:
                self.expr(node.value, scope)
            return
        if isinstance(node, (A.Let, A.Assign)):
            self.expr(node.value, scope)
            node.scope = self.target_scope(scope, node.name)
            return
        if isinstance(node, A.ForIn):
            self.expr(node.iter, scope)
            node.scope = self.target_scope(scope, node.var)
            self.block(node.body, scope, loop_depth + 1)
            return
        if isinstance(node, A.While):
            self.expr(node.cond, scope)
            self.block(node.body, scope, loop_depth + 1)
            return
        if isinstance(node, A.If):
            self.expr(node.cond, scope)
            self.block(node.then, scope, loop_depth)
            if node.orelse is not None:
                self.block(node.orelse, scope, loop_depth)
            return
        if isinstance(node, A.GlobalDecl):
            return
        for child in A.children(node):
            self.expr(child, scope)

    def expr(self, node, scope):
        if isinstance(node, A.Name):
            node.scope = self.lookup(scope, node.name)
            return
        for child in A.children(node):
            self.expr(child, scope)


def resolve(program: A.Program) -> A.Program:
    """Annotate every Name/target with its scope; raises ResolveError."""
    return Resolver(program).run()


def load(source: str) -> A.Program:
    from specjit.frontend.parser import parse

    return resolve(parse(source))
