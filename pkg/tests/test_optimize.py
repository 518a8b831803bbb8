from unittest import mock

import pytest
from hypothesis import given, settings, strategies as st

from specjit import fixtures as F
from specjit.corpus import generate_program, inputs_for
from specjit.graph.execute import Executor
from specjit.graph.ir import Graph, validate
from specjit.graph.optimize import clone, cse, dce, fold, optimize, strip_asserts
from specjit.oracle import run_outcome
from specjit.runtime.values import Heap
from tests.conftest import compiled


def arith_graph():
    g = Graph("o", "o", n_params=1)
    x = g.add("Arg", {"index": 0, "name": "x"})
    a = g.add("Const", {"value": 2})
    b = g.add("Const", {"value": 3})
    s = g.add("BinOp", {"op": "+"}, [(a, 0), (b, 0)])       # folds to 5
    m1 = g.add("BinOp", {"op": "*"}, [(x, 0), (s, 0)])
    m2 = g.add("BinOp", {"op": "*"}, [(x, 0), (s, 0)])      # duplicate of m1
    g.add("BinOp", {"op": "-"}, [(x, 0), (a, 0)])           # dead
    out = g.add("BinOp", {"op": "+"}, [(m1, 0), (m2, 0)])
    g.outputs = [(out, 0)]
    return g


def run(g, *args):
    return Executor().execute(g, list(args), Heap(), []).value


def test_fold_constants():
    g = arith_graph()
    assert fold(g) == 1
    consts = [n.attrs["value"] for n in g.nodes.values() if n.kind == "Const"]
    assert 5 in consts


def test_fold_skips_erroring_nodes():
    g = Graph("e", "e")
    a = g.add("Const", {"value": 1})
    z = g.add("Const", {"value": 0})
    d = g.add("BinOp", {"op": "/"}, [(a, 0), (z, 0)])
    g.outputs = [(d, 0)]
    fold(g)
    assert g.nodes[d].kind == "BinOp"


def test_cse_merges_duplicates():
    g = arith_graph()
    fold(g)
    assert cse(g) >= 1
    assert g.count("BinOp") == 3  # m1, dead sub, final add


def test_dce_removes_unused():
    g = arith_graph()
    removed = dce(g)
    assert removed >= 1
    assert not any(n.kind == "BinOp" and n.attrs["op"] == "-" for n in g.nodes.values())


def test_optimize_preserves_result():
    g = arith_graph()
    before = run(clone(g), 4)
    optimize(g)
    assert validate(g) == []
    assert run(g, 4) == before == 40


def test_unknown_pass_rejected():
    with pytest.raises(ValueError):
        optimize(arith_graph(), ("fold", "inline"))


def test_asserts_survive_dce():
    _, g = compiled(F.P2_DRIVER, "step")
    n = len(g.assert_ids())
    optimize(g)
    assert len(g.assert_ids()) == n


def test_strip_asserts_does_not_touch_original():
    _, g = compiled(F.P2_DRIVER, "step")
    n = len(g.assert_ids())
    bare = strip_asserts(g)
    assert len(g.assert_ids()) == n and not bare.assert_ids()
    assert validate(bare) == []


def test_clone_drops_exec_cache():
    rt, g = compiled(F.P1_DRIVER, "loss_fn")
    assert "_exec_cache" in g.__dict__
    assert "_exec_cache" not in clone(g).__dict__


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=3000))
def test_optimization_is_semantics_preserving(seed):
    p = generate_program(seed)
    src = p.render(inputs_for(p)[1])
    optimized = run_outcome(src)
    with mock.patch("specjit.orchestrator.optimize", lambda g, *a: g):
        raw = run_outcome(src)
    assert optimized.same_as(raw)
