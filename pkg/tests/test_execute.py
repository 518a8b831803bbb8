import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specjit import fixtures as F
from specjit.graph.execute import (
    DEAD, FAIL_ENV, Aborted, Committed, Executor, TaggedProgram, compile_plan, delayed_builtins,
    run_tagged,
)
from specjit.graph.ir import Graph
from specjit.graph.optimize import strip_asserts
from specjit.runtime.values import make_tensor
from tests.conftest import compiled


def branch_graph():
    """out = x * 2 if p else x + 1, plus the Merge arm index."""
    g = Graph("b", "b", n_params=2)
    p = g.add("Arg", {"index": 0, "name": "p"})
    x = g.add("Arg", {"index": 1, "name": "x"})
    sw = g.add("Switch", {}, [(x, 0), (p, 0)])
    two = g.add("Const", {"value": 2})
    one = g.add("Const", {"value": 1})
    t = g.add("BinOp", {"op": "*"}, [(sw, 0), (two, 0)])
    f = g.add("BinOp", {"op": "+"}, [(sw, 1), (one, 0)])
    m = g.add("Merge", {}, [(t, 0), (f, 0)])
    g.outputs = [(m, 0), (m, 1)]
    return g


@pytest.mark.parametrize("engine", ["plan", "tagged"])
@pytest.mark.parametrize("p,x,want", [(True, 5, (10, 0)), (False, 5, (6, 1))])
def test_switch_merge_deadness(engine, p, x, want):
    ex = Executor()
    g = branch_graph()
    args = [p, x, None, None]
    if engine == "plan":
        outs, _ = compile_plan(g, ex, None)(args)
    else:
        outs, _ = run_tagged(TaggedProgram(g, ex, None), args, None)
    assert tuple(outs) == want


def test_dead_sentinel_repr():
    assert repr(DEAD) == "DEAD"


def run_p2_graph(ex, heap=None):
    rt, g = compiled(F.P2_DRIVER, "step")
    heap = rt.heap
    lst = heap.alloc_list([1.0, 2.0, 3.0])
    return rt, g, heap, lst


def test_commit_applies_effects():
    rt, g, heap, lst = run_p2_graph(Executor())
    model = heap.globals["model"]
    s0 = heap.entries[model.id].fields["state"]
    res = Executor().execute(g, [lst], heap, [])
    assert isinstance(res, Committed)
    # s runs s0+1, s0+3, s0+6 and out sums them
    assert res.value == 3 * s0 + 10.0
    assert heap.entries[model.id].fields["state"] == s0 + 6.0


def test_forced_assert_leaves_heap_untouched(monkeypatch):
    rt, g, heap, lst = run_p2_graph(Executor())
    for aid in g.assert_ids():
        monkeypatch.setenv(FAIL_ENV, aid)
        before = heap.snapshot()
        out = []
        res = Executor(audit=True).execute(g, [lst], heap, out)
        assert isinstance(res, Aborted) and res.assumption_id == aid
        assert heap.snapshot() == before and out == []


def test_runtime_error_inside_graph_aborts():
    src = "fn f(x, y) { print(x) \n return x / y }\nfor k in range(4) { print(f(k, 2)) }"
    rt, g = compiled(src, "f")
    heap, out = rt.heap, []
    before = heap.snapshot()
    res = Executor(audit=True).execute(g, [1, 0], heap, out)
    assert isinstance(res, Aborted) and res.error is not None and res.error.kind == "DivByZero"
    assert heap.snapshot() == before and out == []


def test_prints_commit_in_order():
    src = "fn f(x) {\n print(x)\n print(x + 1)\n return x\n}\nfor k in range(4) { f(k) }"
    rt, g = compiled(src, "f")
    out = []
    res = Executor().execute(g, [7], rt.heap, out)
    assert isinstance(res, Committed) and "".join(out) == "7\n8\n"


def test_dynamic_loop_on_tagged_engine():
    src = "fn s(n) {\n let i = 0\n let t = 0\n while i < n {\n  t = t + i\n  i = i + 1\n }\n return t\n}\n" \
          "for k in range(6) { print(s(k)) }"
    rt, g = compiled(src, "s")
    ex = Executor()
    for n in (0, 1, 5, 30):
        res = ex.execute(g, [n], rt.heap, [])
        assert res.value == n * (n - 1) // 2
    assert ex.engine_counts["tagged"] == 4


def test_invoke_recursion():
    rt, g = compiled(F.P4_DRIVER, "fact")
    ex = Executor()
    assert ex.execute(g, [10], rt.heap, []).value == 3628800


def test_invoke_depth_limit_aborts():
    rt, g = compiled(F.P4_DRIVER, "fact")
    res = Executor().execute(g, [400], rt.heap, [])
    assert isinstance(res, Aborted) and res.error.kind == "NestingLimit"


def test_parallel_matches_serial():
    a = make_tensor(np.linspace(-1, 1, 6))
    b = make_tensor(np.linspace(0, 2, 6))
    src = F.TWO_CHAINS + "for k in range(4) { print(two(tensor([1.0 * k, 2.0]), tensor([0.5, 1.0 * k]))) }"
    results = []
    for workers in (1, 2, 8):
        rt, g = compiled(src, "two", workers=workers)
        ex = Executor(workers=workers)
        results.append(ex.execute(g, [a, b], rt.heap, []).value)
        ex.close()
    assert all(np.array_equal(r, results[0]) for r in results)


def test_delayed_builtins_restore():
    with delayed_builtins({"tanh": 0.01}):
        with delayed_builtins({"exp": 0.01}):
            pass
    from specjit.graph.execute import BUILTIN_DELAYS
    assert BUILTIN_DELAYS == {}


def test_parallel_overlaps_delays():
    a = make_tensor(np.ones(3))
    src = F.TWO_CHAINS + "for k in range(4) { print(two(tensor([1.0 * k, 2.0]), tensor([0.5, 1.0 * k]))) }"
    rt, g = compiled(src, "two", workers=2)
    ex = Executor(workers=2)
    with delayed_builtins({"tanh": 0.05}):
        t0 = time.perf_counter()
        ex.execute(g, [a, a], rt.heap, [])
        took = time.perf_counter() - t0
    ex.close()
    assert took < 0.09
    assert ex.engine_counts["parallel"] == 1


def test_strip_asserts_same_result():
    rt1, g = compiled(F.P2_DRIVER, "step")
    rt2, _ = compiled(F.P2_DRIVER, "step")
    bare = strip_asserts(g)
    assert g.assert_ids() and not bare.assert_ids()
    r1 = Executor().execute(g, [rt1.heap.alloc_list([1.0, 2.0, 3.0])], rt1.heap, [])
    r2 = Executor().execute(bare, [rt2.heap.alloc_list([1.0, 2.0, 3.0])], rt2.heap, [])
    assert r1.value == r2.value
    assert rt1.heap.snapshot(portable=True) == rt2.heap.snapshot(portable=True)


def test_invalid_workers():
    with pytest.raises(ValueError):
        Executor(workers=0)


@settings(max_examples=50, deadline=None)
@given(st.booleans(), st.integers(min_value=-50, max_value=50))
def test_plan_and_tagged_agree(p, x):
    ex = Executor()
    g = branch_graph()
    a, _ = compile_plan(g, ex, None)([p, x, None, None])
    b, _ = run_tagged(TaggedProgram(g, ex, None), [p, x, None, None], None)
    assert tuple(a) == tuple(b)
