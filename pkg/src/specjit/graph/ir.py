"""Dataflow graph IR: nodes, structural validation and serialization.

Edges are stored on the consumer: ``inputs`` holds ``(producer id, output
index)`` pairs, one per input slot, and ``ctrl`` holds producer ids of
control-only dependencies.

State access is explicit. Every node that touches the heap takes a state
token in input slot 0 and (except pure readers of internal snapshots)
produces the successor token on output 0. Threading one token through all
state nodes in program order gives the read-after-write and write-after-write
ordering; the executor applies the logged effects only at commit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from specjit.assumptions import (
    Assumption, BranchStable, CalleeStable, TripCount, ValueSpec, ValueSpecAt,
)
from specjit.runtime.values import encode_value, value_from_json, value_to_json

# kind -> (fixed input count or None for variadic, output count or None for computed)
_ARITY: dict[str, tuple[int | None, int | None]] = {
    "Const": (0, 1), "Arg": (0, 1),
    "BinOp": (2, 1), "UnOp": (1, 1), "Builtin": (None, None), "TensorFromList": (2, 2),
    "ListMake": (None, 2), "RecordMake": (None, 2),
    "Switch": (2, 2), "Merge": (None, 2), "Enter": (1, 1), "Exit": (1, 1),
    "NextIteration": (1, 1), "LoopCond": (1, 1), "Identity": (1, 1),
    "Invoke": (None, 2),
    "GetAttr": (2, 2), "SetAttr": (3, 1), "GetSubscr": (3, 2), "SetSubscr": (4, 1),
    "ListAppend": (3, 1), "Print": (None, 1),
    "IterItems": (2, 3), "IterItem": (2, 1),
    "Assert": (1, 0), "Check": (1, 0),
}
NODE_KINDS = frozenset(_ARITY)

EFFECT_KINDS = frozenset({"SetAttr", "SetSubscr", "ListAppend", "Print"})
STATE_KINDS = frozenset({"GetAttr", "SetAttr", "GetSubscr", "SetSubscr", "ListAppend", "Print",
                         "ListMake", "RecordMake", "Invoke", "IterItems", "TensorFromList"})
FRAME_KINDS = frozenset({"Enter", "Exit", "NextIteration", "LoopCond"})
CONTROL_KINDS = frozenset({"Switch", "Merge"}) | FRAME_KINDS
PURE_KINDS = frozenset({"Const", "BinOp", "UnOp", "Identity", "IterItem"})
COMPARATORS = ("EqInt", "EqArm", "ShapeMatch", "RefEq", "ValueEq")


def is_state_node(node: "Node") -> bool:
    if node.kind in STATE_KINDS:
        return True
    return node.kind == "Builtin" and bool(node.attrs.get("state"))


def is_pure(node: "Node") -> bool:
    """Side-effect-free and state-free (safe to fold, merge or drop)."""
    if node.kind in PURE_KINDS:
        return True
    return node.kind == "Builtin" and not node.attrs.get("state")


def out_arity(node: "Node") -> int:
    fixed = _ARITY[node.kind][1]
    if fixed is not None:
        return fixed
    # Builtin: stateful builtins return (state', value)
    return 2 if node.attrs.get("state") else 1


@dataclass
class Node:
    id: int
    kind: str
    attrs: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    ctrl: list = field(default_factory=list)

    def __repr__(self):
        a = ",".join(f"{k}={_attr_text(v)}" for k, v in sorted(self.attrs.items()))
        return f"n{self.id}:{self.kind}({a})<-{self.inputs}" + (f" ctrl{self.ctrl}" if self.ctrl else "")


@dataclass
class Graph:
    id: str
    name: str = ""
    n_params: int = 0
    nodes: dict[int, Node] = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    state_output: tuple | None = None
    subgraphs: dict[str, "Graph"] = field(default_factory=dict)
    assumptions: list[Assumption] = field(default_factory=list)
    fingerprint: str = ""
    next_id: int = field(default=0, repr=False, compare=False)

    # -- building -----------------------------------------------------------

    def add(self, kind: str, attrs: dict | None = None, inputs=(), ctrl=()) -> int:
        if kind not in NODE_KINDS:
            raise ValueError(f"unknown node kind {kind}")
        nid = self.next_id
        self.next_id = nid + 1
        self.nodes[nid] = Node(nid, kind, dict(attrs or {}), [tuple(i) for i in inputs], list(ctrl))
        return nid

    def node(self, nid: int) -> Node:
        return self.nodes[nid]

    def kinds(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for n in self.nodes.values():
            out[n.kind] = out.get(n.kind, 0) + 1
        return out

    def count(self, *kinds) -> int:
        return sum(1 for n in self.nodes.values() if n.kind in kinds)

    def all_graphs(self):
        """This graph followed by every subgraph (each once)."""
        yield self
        for sub in self.subgraphs.values():
            if sub is not self:
                yield sub

    def total_nodes(self) -> int:
        return sum(len(g.nodes) for g in self.all_graphs())

    def assert_ids(self) -> list[str]:
        ids = []
        for g in self.all_graphs():
            ids.extend(n.attrs["assumption"] for n in g.nodes.values() if n.kind == "Assert")
        return ids

    def consumers(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for n in self.nodes.values():
            for src, _ in n.inputs:
                if src in out:
                    out[src].append(n.id)
            for src in n.ctrl:
                if src in out:
                    out[src].append(n.id)
        return out

    # -- equality -------------------------------------------------------------

    def structure(self):
        return json.dumps(_graph_dict(self, include_subgraphs=True), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.structure() == other.structure()

    __hash__ = None


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class StructuralError:
    code: str
    message: str
    node: int | None = None

    def __str__(self):
        where = f" (node {self.node})" if self.node is not None else ""
        return f"{self.code}: {self.message}{where}"


def _find_cycle(g: Graph) -> int | None:
    """A node on a cycle that does not pass through NextIteration->Merge, if any."""
    succ: dict[int, list[int]] = {nid: [] for nid in g.nodes}
    for n in g.nodes.values():
        for src, _ in n.inputs:
            if src in g.nodes and not (g.nodes[src].kind == "NextIteration" and n.kind == "Merge"):
                succ[src].append(n.id)
        for src in n.ctrl:
            if src in g.nodes:
                succ[src].append(n.id)
    color = dict.fromkeys(g.nodes, 0)
    for root in g.nodes:
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            nid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[nid] = 2
                stack.pop()
            elif color[nxt] == 1:
                return nxt
            elif color[nxt] == 0:
                color[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return None


def validate(g: Graph, _seen=None) -> list[StructuralError]:
    errors: list[StructuralError] = []
    seen = _seen if _seen is not None else set()
    seen.add(g.id)
    seqs: dict[int, int] = {}
    param_args = set()
    for n in g.nodes.values():
        if n.kind not in NODE_KINDS:
            errors.append(StructuralError("kind", f"unknown node kind {n.kind}", n.id))
            continue
        want_in = _ARITY[n.kind][0]
        if want_in is not None and len(n.inputs) != want_in:
            errors.append(StructuralError("arity", f"{n.kind} needs {want_in} inputs, has {len(n.inputs)}", n.id))
        if n.kind == "Merge" and len(n.inputs) < 2:
            errors.append(StructuralError("arity", "Merge needs at least 2 inputs", n.id))
        if n.kind in ("Print", "ListMake", "RecordMake", "Invoke") and len(n.inputs) < 1:
            errors.append(StructuralError("arity", f"{n.kind} needs a state input", n.id))
        for slot, inp in enumerate(n.inputs):
            if inp is None or len(inp) != 2:
                errors.append(StructuralError("slot", f"input slot {slot} unfilled", n.id))
                continue
            src, out = inp
            if src not in g.nodes:
                errors.append(StructuralError("edge", f"input {slot} refers to missing node {src}", n.id))
            elif not 0 <= out < out_arity(g.nodes[src]):
                errors.append(StructuralError("edge", f"input {slot} uses missing output {out} of {src}", n.id))
            elif g.nodes[src].kind == "NextIteration" and n.kind != "Merge":
                errors.append(StructuralError("cycle", "NextIteration may only feed a Merge", n.id))
        for src in n.ctrl:
            if src not in g.nodes:
                errors.append(StructuralError("edge", f"control edge from missing node {src}", n.id))
        if n.kind in EFFECT_KINDS:
            seq = n.attrs.get("seq")
            if not isinstance(seq, int):
                errors.append(StructuralError("seq", "effect node without seq", n.id))
            elif seq in seqs:
                errors.append(StructuralError("seq", f"seq {seq} also used by node {seqs[seq]}", n.id))
            else:
                seqs[seq] = n.id
        if n.kind == "Arg" and "role" not in n.attrs:
            param_args.add(n.attrs.get("index"))
        if n.kind == "Assert" and n.attrs.get("comparator") not in COMPARATORS:
            errors.append(StructuralError("assert", f"bad comparator {n.attrs.get('comparator')}", n.id))
        if n.kind == "Invoke" and n.attrs.get("target") not in g.subgraphs:
            errors.append(StructuralError("invoke", f"missing subgraph {n.attrs.get('target')}", n.id))
    if param_args != set(range(g.n_params)):
        errors.append(StructuralError("args", f"parameter Arg indices {sorted(param_args, key=str)} "
                                              f"are not dense 0..{g.n_params - 1}"))
    for src, out in list(g.outputs) + ([g.state_output] if g.state_output else []):
        if src not in g.nodes or not 0 <= out < out_arity(g.nodes[src]):
            errors.append(StructuralError("output", f"graph output ({src}, {out}) is invalid"))
    bad = _find_cycle(g)
    if bad is not None:
        errors.append(StructuralError("cycle", "data/control cycle not through NextIteration", bad))
    for sid, sub in g.subgraphs.items():
        if sid not in seen:
            for e in validate(sub, seen):
                errors.append(StructuralError(e.code, f"[{sid}] {e.message}", e.node))
    return errors


# -- serialization -------------------------------------------------------------

def spec_to_json(spec: ValueSpec) -> dict:
    d = {"level": spec.level, "kind": spec.kind}
    if spec.shape is not None:
        d["shape"] = list(spec.shape)
    if spec.level == 0:
        d["constant"] = value_to_json(spec.constant)
    return d


def spec_from_json(d: dict) -> ValueSpec:
    shape = tuple(d["shape"]) if "shape" in d else None
    const = value_from_json(d["constant"]) if "constant" in d else None
    return ValueSpec(d["level"], d["kind"], shape, const)


def _payload_to_json(p) -> dict:
    if isinstance(p, BranchStable):
        return {"branch": p.arm}
    if isinstance(p, TripCount):
        return {"trip_count": p.n}
    if isinstance(p, CalleeStable):
        return {"callee": p.fn_id}
    return {"spec": spec_to_json(p.spec)}


def _payload_from_json(d):
    (tag, v), = d.items()
    if tag == "branch":
        return BranchStable(v)
    if tag == "trip_count":
        return TripCount(v)
    if tag == "callee":
        return CalleeStable(v)
    return ValueSpecAt(spec_from_json(v))


def _site_to_json(site):
    return list(site) if isinstance(site, tuple) else site


def _site_from_json(site):
    return tuple(site) if isinstance(site, list) else site


def assumption_to_json(a: Assumption) -> dict:
    return {"id": a.id, "site": _site_to_json(a.site), "instance": [_site_to_json(i) for i in a.instance],
            "payload": _payload_to_json(a.payload), "mode": a.mode}


def assumption_from_json(d: dict) -> Assumption:
    inst = tuple(_site_from_json(i) for i in d["instance"])
    return Assumption(_site_from_json(d["site"]), _payload_from_json(d["payload"]), d["mode"], inst)


def _attr_to_json(key, value, kind):
    if kind == "Const" and key == "value":
        return value_to_json(value)
    if key == "expected":
        if isinstance(value, ValueSpec):
            return {"spec": spec_to_json(value)}
        return {"value": value_to_json(value)}
    if isinstance(value, tuple):
        return list(value)
    return value


def _attr_from_json(key, value, kind):
    if kind == "Const" and key == "value":
        return value_from_json(value)
    if key == "expected":
        if "spec" in value:
            return spec_from_json(value["spec"])
        return value_from_json(value["value"])
    if key == "names":
        return tuple(value)
    return value


def _attr_text(v) -> str:
    if isinstance(v, ValueSpec):
        return v.text()
    try:
        return str(encode_value(v)[1:]) if not isinstance(v, (str, tuple, list, dict)) else str(v)
    except TypeError:
        return str(v)


def _graph_dict(g: Graph, include_subgraphs: bool) -> dict:
    nodes = []
    for nid in sorted(g.nodes):
        n = g.nodes[nid]
        nodes.append({
            "id": n.id, "kind": n.kind,
            "attrs": {k: _attr_to_json(k, v, n.kind) for k, v in sorted(n.attrs.items())},
            "inputs": [list(i) for i in n.inputs],
            "ctrl": list(n.ctrl),
        })
    d = {
        "id": g.id, "name": g.name, "n_params": g.n_params, "nodes": nodes,
        "outputs": [list(o) for o in g.outputs],
        "state_output": list(g.state_output) if g.state_output else None,
        "assumptions": [assumption_to_json(a) for a in sorted(g.assumptions, key=lambda a: a.id)],
        "fingerprint": g.fingerprint,
    }
    if include_subgraphs:
        d["subgraphs"] = {sid: _graph_dict(sub, False) for sid, sub in sorted(g.subgraphs.items())}
    return d


def to_json(g: Graph) -> str:
    return json.dumps(_graph_dict(g, True), sort_keys=True, indent=1)


def _graph_from_dict(d: dict) -> Graph:
    g = Graph(d["id"], d.get("name", ""), d.get("n_params", 0))
    for nd in d["nodes"]:
        kind = nd["kind"]
        attrs = {k: _attr_from_json(k, v, kind) for k, v in nd["attrs"].items()}
        g.nodes[nd["id"]] = Node(nd["id"], kind, attrs, [tuple(i) for i in nd["inputs"]], list(nd["ctrl"]))
    g.next_id = max(g.nodes, default=-1) + 1
    g.outputs = [tuple(o) for o in d["outputs"]]
    g.state_output = tuple(d["state_output"]) if d.get("state_output") else None
    g.assumptions = [assumption_from_json(a) for a in d.get("assumptions", [])]
    g.fingerprint = d.get("fingerprint", "")
    return g


def from_json(text: str) -> Graph:
    d = json.loads(text)
    g = _graph_from_dict(d)
    subs = {sid: _graph_from_dict(sd) for sid, sd in d.get("subgraphs", {}).items()}
    # all graphs share one subgraph table so Invoke targets resolve anywhere
    g.subgraphs = subs
    for sub in subs.values():
        sub.subgraphs = subs
    return g


def _dot_label(n: Node) -> str:
    extra = ""
    if n.kind == "Const":
        extra = " " + str(encode_value(n.attrs["value"])[-1])[:24]
    elif n.kind in ("BinOp", "UnOp"):
        extra = " " + n.attrs["op"]
    elif n.kind in ("Builtin", "GetAttr", "SetAttr"):
        extra = " " + str(n.attrs.get("name", ""))
    elif n.kind == "Assert":
        extra = " " + n.attrs["comparator"]
    elif n.kind == "Arg":
        extra = " " + str(n.attrs["role"] if "role" in n.attrs else n.attrs.get("index"))
    return f"{n.id}: {n.kind}{extra}".replace('"', "'")


def to_dot(g: Graph) -> str:
    lines = [f'digraph "{g.id}" {{', "  node [shape=box, fontname=monospace];"]
    for graph in g.all_graphs():
        prefix = "" if graph is g else f"{graph.id}_"
        if graph is not g:
            lines.append(f'  subgraph "cluster_{graph.id}" {{ label="{graph.id}";')
        for nid in sorted(graph.nodes):
            n = graph.nodes[nid]
            shape = ", shape=diamond" if n.kind == "Assert" else ""
            lines.append(f'  "{prefix}{nid}" [label="{_dot_label(n)}"{shape}];')
        for nid in sorted(graph.nodes):
            n = graph.nodes[nid]
            for src, out in n.inputs:
                lines.append(f'  "{prefix}{src}" -> "{prefix}{nid}" [label="{out}"];')
            for src in n.ctrl:
                lines.append(f'  "{prefix}{src}" -> "{prefix}{nid}" [style=dashed];')
        if graph is not g:
            lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump(g: Graph, path: str, fmt: str = "json") -> None:
    text = to_json(g) if fmt == "json" else to_dot(g)
    with open(path, "w") as f:
        f.write(text)


def value_attr(v: Any):
    """Hashable key for a Const value (bit-exact)."""
    return encode_value(v)
