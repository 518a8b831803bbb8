"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")

    def __str__(self):
        return f"{self.line}:{self.column}"


class SLError(Exception):
    """Base class for all user-visible language errors."""

    def __init__(self, message: str, span: SourceSpan | None = None):
        self.message = message
        self.span = span
        where = f" at {span}" if span is not None else ""
        super().__init__(f"{message}{where}")


class LexError(SLError):
    pass


class ParseError(SLError):
    pass


class ResolveError(SLError):
    pass


# Runtime error kinds. Kept as plain strings so graph kernels and the
# interpreter raise byte-identical errors.
TYPE_MISMATCH = "TypeMismatch"
SHAPE_MISMATCH = "ShapeMismatch"
UNKNOWN_ATTR = "UnknownAttr"
INDEX_OUT_OF_RANGE = "IndexOutOfRange"
DIV_BY_ZERO = "DivByZero"
ASSERT_STMT_FAILED = "AssertStmtFailed"
UNKNOWN_BUILTIN = "UnknownBuiltin"
NEGATIVE_RANGE = "NegativeRange"
UNBOUND_VARIABLE = "UnboundVariable"
ARITY_MISMATCH = "ArityMismatch"
NESTING_LIMIT = "NestingLimit"

RUNTIME_ERROR_KINDS = frozenset({
    TYPE_MISMATCH, SHAPE_MISMATCH, UNKNOWN_ATTR, INDEX_OUT_OF_RANGE,
    DIV_BY_ZERO, ASSERT_STMT_FAILED, UNKNOWN_BUILTIN, NEGATIVE_RANGE,
    UNBOUND_VARIABLE, ARITY_MISMATCH, NESTING_LIMIT,
})


class SLRuntimeError(SLError):
    """A typed runtime failure raised by SL code."""

    def __init__(self, kind: str, message: str, span: SourceSpan | None = None):
        assert kind in RUNTIME_ERROR_KINDS, kind
        self.kind = kind
        super().__init__(f"{kind}: {message}", span)

    def with_span(self, span: SourceSpan | None) -> "SLRuntimeError":
        if self.span is None and span is not None:
            self.span = span
            self.args = (f"{self.message} at {span}",)
        return self


class Unconvertible(Exception):
    """Graph generation gave up; the function stays on the interpreter."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class GraphOnlyViolation(Exception):
    """Raised in graph-only mode when a call needs the imperative fallback."""
