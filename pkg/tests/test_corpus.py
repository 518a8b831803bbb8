import random

from hypothesis import given, settings, strategies as st

from specjit.corpus import DRIVER_CALLS, corpus, generate_program, inputs_for, random_input
from specjit.frontend import load


def test_generation_is_deterministic():
    assert generate_program(17).template == generate_program(17).template
    assert generate_program(17).template != generate_program(18).template


def test_corpus_size_and_names():
    progs = corpus(12)
    assert len(progs) == 12 and len({p.name for p in progs}) == 12


def test_inputs_are_fixed_per_program():
    p = generate_program(3)
    assert inputs_for(p) == inputs_for(p) and len(inputs_for(p)) == 5


def test_random_input_is_seeded():
    assert random_input(random.Random(5)) == random_input(random.Random(5))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_every_program_parses(seed):
    p = generate_program(seed)
    for inp in inputs_for(p):
        load(p.render(inp))


def test_driver_calls_main_repeatedly():
    assert DRIVER_CALLS >= 5
    assert generate_program(0).template.count("main(") >= 2
