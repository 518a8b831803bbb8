"""Graph optimization passes: constant folding, CSE and dead-code elimination.

All passes edit a graph in place and keep node ids stable for the nodes they
keep. Folding evaluates with the same operator tables the interpreter uses,
so folded constants are bit-identical to what execution would produce.
"""

from __future__ import annotations

import copy

from specjit.errors import SLRuntimeError
from specjit.graph.execute import topo_order
from specjit.graph.ir import EFFECT_KINDS, Graph, is_pure, validate
from specjit.runtime import ops
from specjit.runtime.values import encode_value

PASSES = ("fold", "cse", "dce")


def clone(g: Graph) -> Graph:
    """Deep copy of a graph and its subgraph table, without executor caches."""
    out = copy.deepcopy(g)
    for sub in out.all_graphs():
        sub.__dict__.pop("_exec_cache", None)
    return out


def _no_items(ref):
    raise SLRuntimeError("TypeMismatch", "list operand in folding")


def _evaluate(n, args):
    kind = n.kind
    if kind == "BinOp":
        return ops.apply_binop(n.attrs["op"], *args)
    if kind == "UnOp":
        return ops.apply_unop(n.attrs["op"], *args)
    if kind == "Identity":
        return args[0]
    if kind == "Builtin":
        name = n.attrs["name"]
        if name in ops.PURE_BUILTINS:
            return ops.call_pure_builtin(name, list(args))
        return ops.call_read_builtin(name, list(args), _no_items)
    raise ValueError(kind)


def fold(g: Graph) -> int:
    """Replace pure nodes whose inputs are all constants by a Const."""
    folded = 0
    nodes = g.nodes
    for nid in topo_order(g):
        n = nodes[nid]
        if n.kind == "Const" or not is_pure(n) or n.kind == "IterItem" or not n.inputs:
            continue
        srcs = [nodes[s] for s, _ in n.inputs]
        if any(s.kind != "Const" for s in srcs):
            continue
        try:
            value = _evaluate(n, [s.attrs["value"] for s in srcs])
        except SLRuntimeError:
            continue  # leave the error to run time
        ctrl = set(n.ctrl)
        for s in srcs:
            ctrl.update(s.ctrl)
        n.kind = "Const"
        n.attrs = {"value": value}
        n.inputs = []
        n.ctrl = sorted(ctrl)
        folded += 1
    return folded


def _cse_key(n, inputs, ctrl):
    if n.kind == "Const":
        attrs = encode_value(n.attrs["value"])
    else:
        attrs = tuple(sorted((k, repr(v)) for k, v in n.attrs.items()))
    return (n.kind, attrs, tuple(inputs), tuple(sorted(set(ctrl))))


def _remap_all(g: Graph, alias: dict[int, int]):
    def r(ref):
        return (alias.get(ref[0], ref[0]), ref[1])
    for n in g.nodes.values():
        n.inputs = [r(i) for i in n.inputs]
        n.ctrl = sorted({alias.get(c, c) for c in n.ctrl})
    g.outputs = [r(o) for o in g.outputs]
    if g.state_output:
        g.state_output = r(g.state_output)


def cse(g: Graph) -> int:
    """Merge pure nodes with equal kind, attributes, inputs and control edges."""
    alias: dict[int, int] = {}
    seen: dict = {}
    for nid in topo_order(g):
        n = g.nodes[nid]
        if not is_pure(n):
            continue
        inputs = [(alias.get(s, s), k) for s, k in n.inputs]
        ctrl = [alias.get(c, c) for c in n.ctrl]
        key = _cse_key(n, inputs, ctrl)
        keep = seen.get(key)
        if keep is None:
            seen[key] = nid
        else:
            alias[nid] = keep
    if alias:
        _remap_all(g, alias)
        for nid in alias:
            del g.nodes[nid]
    return len(alias)


def dce(g: Graph, drop_implicit_args: bool = True) -> int:
    """Remove nodes that no output, Assert, Check or effect depends on."""
    nodes = g.nodes
    if drop_implicit_args and g.state_output and nodes[g.state_output[0]].attrs.get("role") == "state":
        g.state_output = None
    roots = [o[0] for o in g.outputs]
    if g.state_output:
        roots.append(g.state_output[0])
    for n in nodes.values():
        if n.kind in ("Assert", "Check") or n.kind in EFFECT_KINDS:
            roots.append(n.id)
        elif n.kind == "Arg" and ("role" not in n.attrs or not drop_implicit_args):
            roots.append(n.id)
    live = set()
    stack = list(roots)
    while stack:
        nid = stack.pop()
        if nid in live:
            continue
        live.add(nid)
        n = nodes[nid]
        stack.extend(s for s, _ in n.inputs)
        stack.extend(n.ctrl)
    dead = [nid for nid in nodes if nid not in live]
    for nid in dead:
        del nodes[nid]
    return len(dead)


def optimize(g: Graph, toggles=PASSES) -> Graph:
    """Run the selected passes over ``g`` and its subgraphs, in place."""
    toggles = set(toggles)
    unknown = toggles - set(PASSES)
    if unknown:
        raise ValueError(f"unknown passes {sorted(unknown)}")
    for graph in list(g.all_graphs()):
        top = graph is g
        if "fold" in toggles:
            fold(graph)
        if "cse" in toggles:
            cse(graph)
        if "dce" in toggles:
            dce(graph, drop_implicit_args=top)
        graph.__dict__.pop("_exec_cache", None)
    errs = validate(g)
    if errs:
        raise AssertionError("optimizer produced an invalid graph: " + "; ".join(map(str, errs[:5])))
    return g


def strip_asserts(g: Graph) -> Graph:
    """Copy of ``g`` with every Assert removed (benchmark baseline only)."""
    out = clone(g)
    for graph in out.all_graphs():
        gone = {nid for nid, n in graph.nodes.items() if n.kind == "Assert"}
        for nid in gone:
            del graph.nodes[nid]
        for n in graph.nodes.values():
            n.ctrl = [c for c in n.ctrl if c not in gone]
        dce(graph, drop_implicit_args=graph is out)
    return out
