"""AST node classes.

Structural equality ignores spans, site ids and resolver annotations, so
two parses of equivalent text compare equal.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Iterator

from specjit.errors import SourceSpan


@dataclass(eq=True)
class AstNode:
    span: SourceSpan | None = field(default=None, compare=False, repr=False, kw_only=True)
    site: int = field(default=-1, compare=False, repr=False, kw_only=True)

    @property
    def kind(self) -> str:
        return type(self).__name__


# -- expressions -------------------------------------------------------------

@dataclass(eq=True)
class Literal(AstNode):
    value: Any

    def __eq__(self, other):
        # 1 == 1.0 == True in Python; literals must also agree on type.
        return type(other) is Literal and type(self.value) is type(other.value) and self.value == other.value

    __hash__ = None


@dataclass(eq=True)
class Name(AstNode):
    name: str
    scope: str | None = field(default=None, compare=False)


@dataclass(eq=True)
class BinOp(AstNode):
    op: str
    left: AstNode
    right: AstNode


@dataclass(eq=True)
class UnOp(AstNode):
    op: str
    operand: AstNode


@dataclass(eq=True)
class Call(AstNode):
    func: AstNode
    args: list[AstNode]


@dataclass(eq=True)
class AttrGet(AstNode):
    obj: AstNode
    name: str


@dataclass(eq=True)
class SubscrGet(AstNode):
    obj: AstNode
    index: AstNode


@dataclass(eq=True)
class ListLit(AstNode):
    items: list[AstNode]


@dataclass(eq=True)
class RecordField(AstNode):
    name: str
    value: AstNode


@dataclass(eq=True)
class RecordLit(AstNode):
    fields: list[RecordField]


# -- statements --------------------------------------------------------------

@dataclass(eq=True)
class Param(AstNode):
    name: str


@dataclass(eq=True)
class FnDef(AstNode):
    name: str
    params: list[Param]
    body: list[AstNode]
    # filled in by the resolver
    captures: list[str] = field(default_factory=list, compare=False)
    local_names: set[str] = field(default_factory=set, compare=False, repr=False)
    global_names: set[str] = field(default_factory=set, compare=False, repr=False)
    is_toplevel: bool = field(default=False, compare=False)


@dataclass(eq=True)
class Let(AstNode):
    name: str
    value: AstNode
    scope: str | None = field(default=None, compare=False)


@dataclass(eq=True)
class Assign(AstNode):
    name: str
    value: AstNode
    scope: str | None = field(default=None, compare=False)


@dataclass(eq=True)
class AttrAssign(AstNode):
    obj: AstNode
    name: str
    value: AstNode


@dataclass(eq=True)
class SubscrAssign(AstNode):
    obj: AstNode
    index: AstNode
    value: AstNode


@dataclass(eq=True)
class GlobalDecl(AstNode):
    name: str


@dataclass(eq=True)
class If(AstNode):
    cond: AstNode
    then: list[AstNode]
    orelse: list[AstNode] | None = None


@dataclass(eq=True)
class While(AstNode):
    cond: AstNode
    body: list[AstNode]


@dataclass(eq=True)
class ForIn(AstNode):
    var: str
    iter: AstNode
    body: list[AstNode]
    scope: str | None = field(default=None, compare=False)


@dataclass(eq=True)
class Return(AstNode):
    value: AstNode | None = None


@dataclass(eq=True)
class Break(AstNode):
    pass


@dataclass(eq=True)
class Continue(AstNode):
    pass


@dataclass(eq=True)
class Assert(AstNode):
    cond: AstNode


@dataclass(eq=True)
class ExprStmt(AstNode):
    expr: AstNode


@dataclass(eq=True)
class Program(AstNode):
    body: list[AstNode]
    # site id -> node, filled by assign_sites
    sites: dict[int, AstNode] = field(default_factory=dict, compare=False, repr=False)
    functions: dict[int, FnDef] = field(default_factory=dict, compare=False, repr=False)


# Scope annotations for names.
LOCAL = "Local"
PARAM = "Param"
GLOBAL = "Global"
BUILTIN = "Builtin"
CAPTURE = "Capture"


def children(node: AstNode) -> Iterator[AstNode]:
    """Yield child nodes in declaration (source) order."""
    for f in dataclasses.fields(node):
        if not f.compare or f.name in ("span", "site"):
            continue
        value = getattr(node, f.name)
        if isinstance(value, AstNode):
            yield value
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, AstNode):
                    yield item


def walk(node: AstNode) -> Iterator[AstNode]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(list(children(cur))))


def assign_sites(program: Program) -> Program:
    """Number every node in pre-order; deterministic for identical text."""
    program.sites.clear()
    program.functions.clear()
    for i, node in enumerate(walk(program)):
        node.site = i
        program.sites[i] = node
        if isinstance(node, FnDef):
            program.functions[i] = node
    return program


def contains(stmts: list[AstNode], kinds: tuple[type, ...], *, into_loops: bool = True,
             into_fns: bool = False) -> bool:
    """True if any node of the given kinds appears in ``stmts``."""
    stack = list(stmts)
    while stack:
        node = stack.pop()
        if isinstance(node, kinds):
            return True
        if isinstance(node, FnDef) and not into_fns:
            continue
        if isinstance(node, (While, ForIn)) and not into_loops:
            continue
        stack.extend(children(node))
    return False
