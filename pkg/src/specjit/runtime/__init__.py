"""Values, heap, operator semantics and the imperative executor."""
