import pytest
from hypothesis import given, settings, strategies as st

from specjit.assumptions import (
    KIND, PARTIAL, SHAPE, TOP, TOP_SPEC, VALUE, Assumption, AssumptionSet, BranchStable,
    CalleeStable, TripCount, ValueSpec, ValueSpecAt, cap_level, is_promotable, join, kind_spec,
    leq, matches, relax, shape_spec, spec_of, specificity,
)
from specjit.runtime.values import FLOAT, INT, TENSOR, make_tensor
from tests.strategies import specs, values

import numpy as np


def t(*shape):
    return make_tensor(np.zeros(shape))


def test_join_examples():
    assert join(shape_spec((4, 8)), shape_spec((3, 8))) == shape_spec((None, 8))
    assert join(spec_of(1), spec_of(2)) == kind_spec(INT)
    assert join(spec_of(1), spec_of(1.0)) == TOP_SPEC
    assert join(shape_spec((2,)), shape_spec((2, 2))) == kind_spec(TENSOR)


def test_spec_validation():
    with pytest.raises(ValueError):
        ValueSpec(SHAPE, INT, (1,))
    with pytest.raises(ValueError):
        ValueSpec(PARTIAL, TENSOR, (1, 2))
    with pytest.raises(ValueError):
        ValueSpec(TOP, INT)


def test_matches_levels():
    assert matches(spec_of(3), 3) and not matches(spec_of(3), 4)
    assert matches(shape_spec((None, 8)), t(5, 8))
    assert not matches(shape_spec((None, 8)), t(5, 7))
    assert matches(TOP_SPEC, "anything")


def test_value_match_is_bitwise():
    assert not matches(spec_of(0.0), -0.0)
    assert matches(spec_of(float("nan")), float("nan"))


def test_promotable():
    assert is_promotable(spec_of(1.5))
    assert is_promotable(spec_of(make_tensor(2.0)))
    assert not is_promotable(spec_of(t(2)))
    assert not is_promotable(kind_spec(INT))


def test_cap_level():
    assert cap_level(spec_of(t(2, 3)), SHAPE) == shape_spec((2, 3))
    assert cap_level(spec_of(5), KIND) == kind_spec(INT)
    assert cap_level(kind_spec(INT), SHAPE) == kind_spec(INT)


def test_relax_value_spec_one_step():
    a = Assumption(7, ValueSpecAt(shape_spec((4, 8))))
    r = relax(a, t(3, 8))
    assert r.payload.spec == shape_spec((None, 8)) and r.site == 7


def test_relax_control_drops():
    for p in (BranchStable("then"), TripCount(3), CalleeStable(2)):
        assert relax(Assumption(1, p), None) is None


def test_relax_to_top_drops():
    assert relax(Assumption(1, ValueSpecAt(spec_of(1))), 1.0) is None


def test_assumption_ids_stable_and_distinct():
    a = Assumption(3, TripCount(4))
    assert a.id == Assumption(3, TripCount(4)).id
    assert a.id != Assumption(3, TripCount(5)).id
    assert a.id != Assumption(3, TripCount(4), instance=(1,)).id


def test_assumption_set_conflicts():
    s = AssumptionSet([Assumption(1, TripCount(2))])
    s.add(Assumption(1, TripCount(2)))
    assert len(s) == 1
    with pytest.raises(ValueError):
        s.add(Assumption(1, TripCount(3)))


def test_trip_count_non_negative():
    with pytest.raises(ValueError):
        TripCount(-1)


@settings(max_examples=300)
@given(specs, specs)
def test_join_commutative_upper_bound(a, b):
    j = join(a, b)
    assert j == join(b, a)
    assert leq(a, j) and leq(b, j)


@settings(max_examples=200)
@given(specs, specs, specs)
def test_join_associative(a, b, c):
    assert join(join(a, b), c) == join(a, join(b, c))


@given(specs)
def test_join_idempotent(a):
    assert join(a, a) == a


@settings(max_examples=200)
@given(specs, values)
def test_join_preserves_matching(a, v):
    if matches(a, v):
        assert matches(join(a, spec_of(v)), v)


@settings(max_examples=200)
@given(specs, specs)
def test_specificity_monotone(a, b):
    if leq(a, b) and a != b:
        assert specificity(a) < specificity(b)


@settings(max_examples=200)
@given(values, st.lists(values, min_size=1, max_size=8))
def test_relaxation_chain_terminates(v, later):
    a = Assumption(0, ValueSpecAt(spec_of(v)))
    steps = 0
    for obs in later:
        if matches(a.payload.spec, obs):
            continue
        a = relax(a, obs)
        steps += 1
        if a is None:
            break
        assert matches(a.payload.spec, obs)
    assert steps <= 4
