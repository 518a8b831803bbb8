import json

import numpy as np
import pytest

from specjit import fixtures as F
from specjit.assumptions import PARTIAL, kind_spec, shape_spec
from specjit.errors import GraphOnlyViolation, SLRuntimeError
from specjit.frontend import load
from specjit.orchestrator import (
    ACTIVE, GRAPH_ONLY, IMPERATIVE, RETIRED, CacheEntry, Runtime, run_source,
)
from specjit.oracle import compare
from specjit.runtime.values import make_tensor


def test_fresh_runtime_reports_zero(runtime):
    s = runtime(F.P1).stats()
    assert s["graph_calls"] == 0 and s["interpreted_calls"] == 0
    assert s["cache_entries"] == 0 and s["aborts"] == {} and s["functions"] == {}


def test_p1_warmup_trace():
    rt = run_source(F.P1_DRIVER, warmup=3)
    s = rt.stats()
    assert (s["interpreted_calls"], s["graph_calls"], s["cache_entries"]) == (3, 2, 1)


def test_p1_int_call_is_a_cache_miss(runtime):
    rt = runtime(F.P1_DRIVER)
    rt.run()
    assert rt.call("loss_fn", 3, 2.0) == 1.0
    fs = rt.function_state("loss_fn")
    assert len(fs.active()) == 2
    assert fs.interpreted_calls == 4
    keys = sorted(tuple(s.text() for s in e.key) for e in fs.entries)
    assert keys == [("Kind(Float)", "Kind(Float)"), ("Kind(Int)", "Kind(Float)")]


def test_p3_single_trip_abort_then_dynamic():
    rt = run_source(F.P3_DRIVER)
    s = rt.stats()
    assert s["aborts"] == {"trip_count": 1}
    assert s["historical_entries"] == 2
    fs = rt.function_state("step")
    assert [e.state for e in fs.entries].count(RETIRED) == 1
    assert fs.active()[0].graph.count("NextIteration") > 0


def test_p3_matches_oracle():
    ok, ref, got = compare(F.P3_DRIVER)
    assert ok and ref.output == got.output


@pytest.mark.parametrize("name", sorted(F.ALL))
def test_fixtures_match_oracle(name):
    ok, _, got = compare(F.ALL[name])
    assert ok
    assert got.stats["graph_calls"] > 0


def test_imperative_mode_never_compiles():
    rt = run_source(F.P1_DRIVER, mode=IMPERATIVE)
    assert rt.stats()["graph_calls"] == 0 and rt.functions == {}


def shape_program():
    return "let m = record { w: zeros([4, 8]) }\nfn f(x) { return sum(m.w * x) }\n"


def test_value_spec_failure_tolerance_then_relax(runtime):
    rt = runtime(shape_program())
    rt.run()
    for k in range(4):
        rt.call("f", 1.0 * k)
    fs = rt.function_state("f")
    assert len(fs.active()) == 1
    first = fs.entries[0]
    m = rt.heap.globals["m"]
    rt.heap.entries[m.id].fields["w"] = make_tensor(np.zeros((3, 8)))
    rt.call("f", 2.0)  # first failure: kept
    assert fs.aborts["spec"] == 1 and first.state == ACTIVE
    rt.call("f", 2.0)  # second failure: relaxed and retired
    assert fs.aborts["spec"] == 2 and first.state == RETIRED
    specs = [spec for spec in fs.overrides.values() if spec is not None]
    assert shape_spec((None, 8)) in specs
    newest = fs.active()[-1]
    assert any(a.payload.spec.level == PARTIAL for a in newest.assumptions if a.category == "spec")
    before = fs.graph_calls
    rt.call("f", 3.0)
    assert fs.graph_calls == before + 1


def test_retired_entry_never_runs(runtime):
    rt = runtime(F.P3_DRIVER)
    rt.run()
    fs = rt.function_state("step")
    retired = [e for e in fs.entries if e.state == RETIRED][0]
    hits = retired.hits
    lst = rt.heap.alloc_list([1.0, 2.0, 3.0])
    rt.call("step", lst)
    assert retired.hits == hits


def test_more_specific_entry_wins():
    fs_entries = [
        CacheEntry(1, (kind_spec("Tensor"),), None, None),
        CacheEntry(1, (shape_spec((2, 2)),), None, None),
    ]
    fs_entries.sort(key=lambda e: e.specificity)
    t = make_tensor(np.zeros((2, 2)))
    match = next(e for e in fs_entries if e.matches([t]))
    assert match.key == (shape_spec((2, 2)),)


def test_tensor_dispatch_by_shape(runtime):
    src = "fn f(t) { return sum(t * 2.0) }\n"
    rt = runtime(src)
    rt.run()
    a = make_tensor(np.ones((2, 3)))
    b = make_tensor(np.ones((4, 3)))
    for _ in range(4):
        rt.call("f", a)
    fs = rt.function_state("f")
    assert fs.entries[0].key == (shape_spec((2, 3)),)
    rt.call("f", b)
    assert len(fs.active()) == 2


def test_graph_only_violation():
    src = "fn f(x) {\n  fn g(y) { return y + x }\n  return g(1)\n}\nfor k in range(5) { print(f(k)) }"
    with pytest.raises(GraphOnlyViolation):
        run_source(src, mode=GRAPH_ONLY)


def test_graph_only_accepts_stable_program():
    rt = run_source(F.P1_DRIVER, mode=GRAPH_ONLY)
    assert rt.stats()["graph_calls"] == 2


def test_runtime_error_falls_back_to_interpreter(runtime):
    src = "fn f(x, y) { return x / y }\n"
    rt = runtime(src)
    rt.run()
    for k in range(5):
        rt.call("f", k, 2)
    with pytest.raises(SLRuntimeError) as e:
        rt.call("f", 1, 0)
    assert e.value.kind == "DivByZero"
    fs = rt.function_state("f")
    assert fs.aborts["error"] == 1 and fs.active()


def test_cache_max_evicts_least_recent(runtime):
    src = "fn f(x) { return x }\nfn g(x) { return x }\n"
    rt = runtime(src, cache_max=1)
    rt.run()
    for _ in range(4):
        rt.call("f", 1.0)
    for _ in range(4):
        rt.call("g", 1.0)
    s = rt.stats()
    assert s["cache_entries"] == 1
    assert rt.function_state("f").entries[0].state == "Evicted"


def test_bad_options():
    prog = load(F.P1)
    with pytest.raises(ValueError):
        Runtime(prog, mode="turbo")
    with pytest.raises(ValueError):
        Runtime(prog, warmup=0)
    with pytest.raises(ValueError):
        Runtime(prog, cache_max=0)


def test_stats_json_serializable():
    rt = run_source(F.P4_DRIVER)
    text = json.dumps(rt.stats())
    d = json.loads(text)
    fn = next(iter(d["functions"].values()))
    assert {"mode", "calls", "entries", "aborts", "time_graph_s"} <= set(fn)
    assert "branches" in d["profile"]


def test_abort_count_is_bounded():
    src = ("let m = record { w: 1 }\nfn f(x) { return x * m.w }\n"
           "for k in range(40) {\n  m.w = k % 3\n  if k > 20 { m.w = 0.5 * k }\n  print(f(k))\n}")
    ok, _, got = compare(src)
    assert ok
    assert sum(got.stats["aborts"].values()) <= 8
