import json

import pytest
from hypothesis import given, settings, strategies as st

from specjit import fixtures as F
from specjit.assumptions import Assumption, TripCount
from specjit.corpus import generate_program, inputs_for
from specjit.frontend import load
from specjit.graph.ir import Graph, NODE_KINDS, dump, from_json, to_dot, to_json, validate
from specjit.orchestrator import Runtime
from tests.conftest import compiled


def small_graph():
    g = Graph("g", "f", n_params=1)
    a = g.add("Arg", {"index": 0, "name": "x"})
    c = g.add("Const", {"value": 2})
    m = g.add("BinOp", {"op": "*"}, [(a, 0), (c, 0)])
    g.outputs = [(m, 0)]
    return g


def codes(g):
    return {e.code for e in validate(g)}


def test_valid_small_graph():
    assert validate(small_graph()) == []


def test_unknown_kind_rejected_on_add():
    with pytest.raises(ValueError):
        Graph("g").add("Frobnicate")


def test_arity_error():
    g = small_graph()
    g.add("BinOp", {"op": "+"}, [(0, 0)])
    assert "arity" in codes(g)


def test_dangling_edge():
    g = small_graph()
    g.nodes[2].inputs[1] = (99, 0)
    assert "edge" in codes(g)


def test_missing_output_port():
    g = small_graph()
    g.nodes[2].inputs[1] = (1, 3)
    assert "edge" in codes(g)


def test_cycle_detected():
    g = small_graph()
    g.nodes[2].inputs[0] = (2, 0)
    assert "cycle" in codes(g)


def test_next_iteration_only_feeds_merge():
    g = small_graph()
    ni = g.add("NextIteration", {}, [(2, 0)])
    g.add("Identity", {}, [(ni, 0)])
    assert "cycle" in codes(g)


def test_duplicate_seq():
    g = small_graph()
    st0 = g.add("Arg", {"role": "state"})
    p1 = g.add("Print", {"seq": 0}, [(st0, 0), (2, 0)])
    g.add("Print", {"seq": 0}, [(p1, 0), (2, 0)])
    assert "seq" in codes(g)


def test_param_args_dense():
    g = small_graph()
    g.n_params = 2
    assert "args" in codes(g)


def test_missing_subgraph():
    g = small_graph()
    st0 = g.add("Arg", {"role": "state"})
    g.add("Invoke", {"target": "nope", "depth": 1}, [(st0, 0)])
    assert "invoke" in codes(g)


def test_empty_graph_serialization():
    d = json.loads(to_json(Graph("empty")))
    assert d["nodes"] == [] and d["outputs"] == []


def test_json_roundtrip_with_assumption_payloads():
    g = small_graph()
    a = Assumption(4, TripCount(3), instance=(1, 2))
    g.assumptions = [a]
    g.add("Assert", {"assumption": a.id, "comparator": "EqInt", "expected": 3}, [(2, 0)])
    back = from_json(to_json(g))
    assert back == g
    assert back.assumptions[0] == a


@pytest.mark.parametrize("name,fn", [("p1", "loss_fn"), ("p2", "step"), ("p3", "step"),
                                     ("p4", "fact"), ("p5", "forward")])
def test_fixture_graphs_roundtrip(name, fn):
    _, g = compiled(F.ALL[name], fn)
    assert validate(g) == []
    back = from_json(to_json(g))
    assert back == g and validate(back) == []


def test_p1_graph_shape():
    _, g = compiled(F.P1_DRIVER, "loss_fn")
    d = json.loads(to_json(g))
    kinds = [n["kind"] for n in d["nodes"]]
    assert kinds.count("Arg") == 2
    ops = sorted(n["attrs"]["op"] for n in d["nodes"] if n["kind"] == "BinOp")
    assert ops == ["*", "**", "+", "-"]
    consts = [n["attrs"]["value"] for n in d["nodes"] if n["kind"] == "Const"]
    values = sorted(float.fromhex(c["float"]) if "float" in c else c["int"] for c in consts)
    assert values == [0.5, 1.5, 2]


def test_dot_output(tmp_path):
    _, g = compiled(F.P4_DRIVER, "fact")
    text = to_dot(g)
    assert text.startswith("digraph") and "Switch" in text and "Invoke" in text
    path = tmp_path / "g.dot"
    dump(g, str(path), "dot")
    assert path.read_text() == text


def test_dump_json(tmp_path):
    path = tmp_path / "g.json"
    dump(small_graph(), str(path), "json")
    assert from_json(path.read_text()) == small_graph()


def test_node_kind_inventory():
    for kind in ("Const", "Arg", "BinOp", "UnOp", "Builtin", "TensorFromList", "ListMake", "Switch",
                 "Merge", "Enter", "Exit", "NextIteration", "LoopCond", "Invoke", "GetAttr", "SetAttr",
                 "GetSubscr", "SetSubscr", "ListAppend", "Print", "Assert", "Identity"):
        assert kind in NODE_KINDS


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=3000))
def test_corpus_graphs_validate_and_roundtrip(seed):
    p = generate_program(seed)
    rt = Runtime(load(p.render(inputs_for(p)[0])))
    try:
        rt.run()
    except Exception:
        pass
    finally:
        rt.close()
    for fs in rt.functions.values():
        for e in fs.entries:
            assert validate(e.graph) == []
            assert from_json(to_json(e.graph)) == e.graph
