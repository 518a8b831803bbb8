"""Hypothesis strategies shared by the lattice tests."""

from hypothesis import strategies as st

from specjit.assumptions import KIND, TOP_SPEC, ValueSpec, kind_spec, shape_spec, spec_of
from specjit.runtime.values import BOOL, FLOAT, INT, STR, TENSOR, make_tensor

import numpy as np

dims = st.integers(min_value=1, max_value=3)
shapes = st.lists(dims, min_size=0, max_size=3).map(tuple)


@st.composite
def partial_shapes(draw):
    shape = list(draw(st.lists(dims, min_size=1, max_size=3)))
    holes = draw(st.lists(st.booleans(), min_size=len(shape), max_size=len(shape)))
    if not any(holes):
        holes[0] = True
    return tuple(None if h else d for d, h in zip(shape, holes))


@st.composite
def tensor_values(draw):
    shape = draw(shapes)
    size = int(np.prod(shape)) if shape else 1
    data = draw(st.lists(st.sampled_from([0.0, 1.0, -2.5]), min_size=size, max_size=size))
    return make_tensor(np.array(data).reshape(shape))


scalar_values = st.one_of(
    st.integers(min_value=-3, max_value=3),
    st.sampled_from([0.0, 0.5, -1.0, float("inf")]),
    st.booleans(),
    st.sampled_from(["a", "b"]),
)

specs = st.one_of(
    scalar_values.map(spec_of),
    tensor_values().map(spec_of),
    shapes.map(shape_spec),
    partial_shapes().map(shape_spec),
    st.sampled_from([INT, FLOAT, BOOL, STR, TENSOR]).map(kind_spec),
    st.just(TOP_SPEC),
)

values = st.one_of(scalar_values, tensor_values())

__all__ = ["specs", "values", "shapes", "partial_shapes", "KIND", "ValueSpec"]
