"""Dataflow graph IR, generation, optimization and execution."""
