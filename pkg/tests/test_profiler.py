import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specjit.assumptions import shape_spec
from specjit.frontend import ast as A, load
from specjit.profiler import (
    MAX_DISTINCT_SPECS, BranchTaken, CallEntered, CalleeAt, LoopDone, ProfileRecord, ValueAt,
    summarize,
)
from specjit.runtime.interpreter import Interpreter
from specjit.runtime.values import Heap, make_tensor
from specjit.corpus import generate_program, inputs_for


def rec_with(events):
    r = ProfileRecord()
    for e in events:
        r.record(e)
    return r


def test_not_ready_before_warmup():
    r = rec_with([CallEntered(1, []), CallEntered(1, [])])
    assert summarize(r, 1, warmup=3) is None
    r.record(CallEntered(1, []))
    assert summarize(r, 1, warmup=3) is not None


def test_warmup_must_be_positive():
    with pytest.raises(ValueError):
        summarize(ProfileRecord(), 1, warmup=0)


def test_branch_stability_is_unanimous():
    r = rec_with([CallEntered(1, [])] * 3 + [BranchTaken(5, "then")] * 3 + [BranchTaken(6, "then")] * 2
                 + [BranchTaken(6, "else")])
    f = summarize(r, 1)
    assert f.branch(5) == "then"
    assert f.branch(6) is None


def test_trip_and_callee_facts():
    r = rec_with([CallEntered(1, [])] * 3 + [LoopDone(9, 3)] * 3 + [CalleeAt(4, 77)] * 3)
    f = summarize(r, 1)
    assert f.trip(9) == 3 and f.callee(4) == 77
    r.record(LoopDone(9, 4))
    assert summarize(r, 1).trip(9) is None


def test_value_join_and_constants():
    r = rec_with([CallEntered(1, [])] * 3)
    r.record(ValueAt(2, make_tensor(np.zeros((4, 8)))))
    r.record(ValueAt(2, make_tensor(np.zeros((3, 8)))))
    for _ in range(3):
        r.record(ValueAt(3, 2.5))
    f = summarize(r, 1)
    assert f.value(2) == shape_spec((None, 8))
    assert f.is_constant(3) and not f.is_constant(2)


def test_distinct_specs_collapse():
    r = ProfileRecord()
    for i in range(MAX_DISTINCT_SPECS + 3):
        r.record(ValueAt(1, i))
    assert len(r.values[1]) <= MAX_DISTINCT_SPECS


def test_unknown_event_rejected():
    with pytest.raises(TypeError):
        ProfileRecord().record("nope")


def test_summarize_is_pure():
    r = rec_with([CallEntered(1, [])] * 3 + [BranchTaken(5, "then")] * 3)
    assert summarize(r, 1) == summarize(r, 1)


def test_json_report():
    r = rec_with([CallEntered(1, [])] * 3 + [BranchTaken(5, "then")])
    j = r.to_json()
    assert j["calls"] == {"1": 3} and j["branches"] == {"5": {"then": 1}}


def test_interpreter_emits_events():
    src = "fn f(x) {\n if x > 0 { x = x - 1 }\n for i in range(2) { x = x + i }\n return x\n}\nprint(f(3))"
    prog = load(src)
    rec = ProfileRecord()
    Interpreter(prog, sink=rec).run_program()
    fn = next(s for s in prog.body if type(s) is A.FnDef)
    assert rec.calls[fn.site] == 1
    assert any(h == {"then": 1} for h in rec.branches.values())
    assert any(h == {2: 1} for h in rec.trip_counts.values())


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=5000))
def test_recording_does_not_change_semantics(seed):
    p = generate_program(seed)
    src = p.render(inputs_for(p)[0])
    outs = []
    for sink in (None, ProfileRecord()):
        heap, out = Heap(), []
        err = None
        try:
            Interpreter(load(src), heap, out, sink=sink).run_program()
        except Exception as e:  # runtime errors must match too
            err = str(e)
        outs.append(("".join(out), heap.snapshot(portable=True), err))
    assert outs[0] == outs[1]
