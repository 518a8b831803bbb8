import pytest

from specjit import fixtures as F
from specjit.assumptions import KIND, VALUE
from specjit.frontend import load
from specjit.graph.gen import GenOptions, direct_functions, generate
from specjit.graph.ir import FRAME_KINDS, validate
from specjit.orchestrator import COMPILED, UNCONVERTIBLE, Runtime
from specjit.profiler import summarize
from tests.conftest import compiled


def driver(fn_src, call, n=5):
    return fn_src + f"\nfor k in range({n}) {{\n  print({call})\n}}\n"


def raw_graph(source, fn_name, unroll=True, specialize=True):
    """Unoptimized graph for ``fn_name`` built from the profile of a run."""
    rt = Runtime(load(source))
    rt.run()
    rt.close()
    fs = rt.function_state(fn_name)
    facts = summarize(rt.profile, fs.fn.site)
    key = list(fs.entries[0].key)
    g, aset = generate(rt.program, fs.fn, facts, key, GenOptions(unroll=unroll, specialize=specialize),
                       {}, direct_functions(rt.program))
    return g, aset


def asserts(g, comparator=None):
    return [n for gg in g.all_graphs() for n in gg.nodes.values()
            if n.kind == "Assert" and (comparator is None or n.attrs["comparator"] == comparator)]


def test_p1_straight_line():
    _, g = compiled(F.P1_DRIVER, "loss_fn")
    assert g.kinds() == {"Arg": 2, "Const": 3, "BinOp": 4}
    assert not asserts(g)


def test_p5_constant_flag_folds_branch():
    _, g = compiled(F.P5_DRIVER, "forward")
    assert g.count("Switch", "Merge") == 0
    assert len(asserts(g)) == 1


def test_p4_recursion_uses_invoke():
    _, g = compiled(F.P4_DRIVER, "fact")
    assert g.count("Switch") >= 1 and g.count("Merge") >= 1 and g.count("Invoke") == 1
    assert validate(g) == []


def test_stable_branch_emits_taken_arm_and_assert():
    src = driver("fn f(x) {\n  if x > 0.0 {\n    return x * 2.0\n  }\n  return -x\n}", "f(1.0 + k)")
    g, _ = raw_graph(src, "f")
    assert g.count("Switch", "Merge") == 0
    assert len(asserts(g, "EqArm")) == 1


def test_unstable_branch_uses_switch_merge():
    src = driver("fn f(x) {\n  let y = 0.0\n  if x > 2.0 {\n    y = x\n  } else {\n    y = -x\n  }\n  return y\n}",
                 "f(1.0 * k)")
    g, _ = raw_graph(src, "f")
    assert g.count("Switch") >= 1 and g.count("Merge") >= 1
    assert not asserts(g, "EqArm")


def test_stable_trip_count_unrolls_exactly():
    src = driver("fn u(x) {\n  let a = x\n  for i in range(5) {\n    a = a * 1.5\n  }\n  return a\n}", "u(1.0 + k)")
    g, _ = raw_graph(src, "u")
    muls = [n for n in g.nodes.values() if n.kind == "BinOp" and n.attrs["op"] == "*"]
    assert len(muls) == 5
    assert g.count(*FRAME_KINDS) == 0 and g.count("Switch", "Merge") == 0


def test_no_unroll_builds_loop_frame():
    src = driver("fn u(x) {\n  let a = x\n  for i in range(5) {\n    a = a * 1.5\n  }\n  return a\n}", "u(1.0 + k)")
    g, _ = raw_graph(src, "u", unroll=False)
    for kind in ("Enter", "Merge", "LoopCond", "Switch", "NextIteration", "Exit"):
        assert g.count(kind) >= 1, kind
    assert validate(g) == []


def test_stable_while_unroll_asserts_each_boundary():
    src = driver("fn w(x) {\n  let i = 0\n  while i < 3 {\n    x = x + 1.0\n    i = i + 1\n  }\n  return x\n}",
                 "w(1.0 * k)")
    g, _ = raw_graph(src, "w")
    assert g.count(*FRAME_KINDS) == 0
    # i is carried as a folded constant, so every boundary check is static
    assert len([n for n in g.nodes.values() if n.kind == "BinOp" and n.attrs["op"] == "+"]) >= 3


def test_unstable_while_is_dynamic():
    src = driver("fn w(n) {\n  let i = 0\n  let s = 0\n  while i < n {\n    s = s + i\n    i = i + 1\n  }\n  return s\n}",
                 "w(k)", n=6)
    g, _ = raw_graph(src, "w")
    assert g.count("LoopCond") == 1 and g.count("NextIteration") >= 2


def test_callee_through_variable_gets_refeq():
    src = ("fn sq(x) { return x * x }\nlet op = sq\nfn f(x) { let g = op\n return g(x) + 1.0 }\n"
           "for k in range(5) { print(f(1.0 * k)) }")
    g, _ = raw_graph(src, "f")
    assert len(asserts(g, "RefEq")) == 1
    assert g.count("Invoke") == 0


def test_direct_global_call_inlines_without_assert():
    src = "fn sq(x) { return x * x }\nfn f(x) { return sq(x) + 1.0 }\nfor k in range(5) { print(f(1.0 * k)) }"
    g, _ = raw_graph(src, "f")
    assert not asserts(g, "RefEq") and g.count("Invoke") == 0


def test_value_sites_get_shape_or_kind_asserts():
    src = "let r = record { w: 1.5 }\nfn f(x) { return x * r.w }\nfor k in range(5) { r.w = 1.0 * k\n print(f(2.0)) }"
    g, _ = raw_graph(src, "f")
    sm = asserts(g, "ShapeMatch")
    assert sm and all(n.attrs["expected"].level == KIND for n in sm)


def test_constant_promotion_uses_value_eq():
    src = "let r = record { w: 1.5 }\nfn f(x) { return x * r.w }\nfor k in range(5) { print(f(1.0 * k)) }"
    g, _ = raw_graph(src, "f")
    assert len(asserts(g, "ValueEq")) == 1


def test_no_specialize_caps_at_kind():
    src = "let r = record { w: 1.5 }\nfn f(x) { return x * r.w }\nfor k in range(5) { print(f(1.0 * k)) }"
    g, _ = raw_graph(src, "f", specialize=False)
    assert not asserts(g, "ValueEq")
    assert all(n.attrs["expected"].level >= KIND for n in asserts(g, "ShapeMatch"))


def test_effects_are_sequenced():
    src = ("let r = record { a: 0 }\nfn f(x) {\n  print(x)\n  r.a = x\n  print(r.a)\n  return x\n}\n"
           "for k in range(5) { f(k) }")
    g, _ = raw_graph(src, "f")
    seqs = [n.attrs["seq"] for n in g.nodes.values() if n.kind in ("Print", "SetAttr")]
    assert sorted(seqs) == list(range(len(seqs))) and len(seqs) == 3


@pytest.mark.parametrize("body,reason", [
    ("fn f(x) {\n  fn g(y) { return y + x }\n  return g(1)\n}", "nested function"),
    ("fn f(x) {\n  for i in range(3) {\n    if i == x { break }\n  }\n  return x\n}", "break"),
])
def test_unconvertible_functions_stay_interpreted(body, reason):
    rt = Runtime(load(driver(body, "f(k)")))
    rt.run()
    rt.close()
    fs = rt.function_state("f")
    assert fs.mode == UNCONVERTIBLE and reason in fs.reason
    assert fs.graph_calls == 0


def test_generated_graphs_validate():
    for name, fn in [("p2", "step"), ("p3", "step"), ("p4", "fact")]:
        rt, g = compiled(F.ALL[name], fn)
        assert rt.function_state(fn).mode == COMPILED
        assert validate(g) == []


def test_dispatch_key_assumptions_recorded():
    _, aset = raw_graph(F.P1_DRIVER, "loss_fn")
    assert all(a.payload.spec.level in (KIND, VALUE) for a in aset if a.category == "spec")
