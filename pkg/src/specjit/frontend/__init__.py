"""SL frontend: lexer, parser, resolver, printer."""

from specjit.frontend.lexer import Token, tokenize
from specjit.frontend.parser import parse, parse_expression, parse_tokens
from specjit.frontend.printer import expr_text, to_source
from specjit.frontend.resolver import BUILTINS, load, resolve

# Grammar production -> (dynamic-feature class, how the graph generator lowers it).
# DCF = dynamic control flow, DT = dynamic types, IF = impure functions.
# No production is syntactically unconvertible; only runtime behaviour is.
FEATURE_TABLE = {
    "fn": ("DCF", "compilation unit; calls inline, or Invoke when recursive"),
    "let": ("basic", "symbol-table binding (data edge)"),
    "assign": ("basic", "local: data edge; global: SetAttr on the globals handle"),
    "attr-assign": ("IF", "SetAttr into the local copy, applied at commit"),
    "subscr-assign": ("IF", "SetSubscr into the local copy, applied at commit"),
    "global": ("IF", "routes the name to the globals handle"),
    "if": ("DCF", "stable arm + Assert, or Switch/Merge"),
    "while": ("DCF", "unrolled + Assert, or Enter/Merge/LoopCond/Switch/NextIteration/Exit"),
    "for": ("DCF", "unrolled + length Assert, or frame over an index"),
    "return": ("DCF", "graph output; Merge over arms when branch is unstable"),
    "break": ("DCF", "interpreter only inside compiled loops"),
    "continue": ("DCF", "interpreter only inside compiled loops"),
    "assert": ("basic", "Check node; failure aborts and replays on the interpreter"),
    "expr-stmt": ("basic", "expression nodes, result dropped"),
    "literal": ("basic", "Const"),
    "list-literal": ("DT", "ListMake allocating a heap handle"),
    "record-literal": ("DT", "RecordMake allocating a heap handle"),
    "name": ("DT", "data edge, Arg, or GetAttr on the globals handle"),
    "call": ("DCF", "builtin node from the whitelist, inline, or Invoke"),
    "attr-get": ("DT", "GetAttr + specialization Assert"),
    "subscr-get": ("DT", "GetSubscr + specialization Assert"),
    "operators": ("basic", "BinOp/UnOp one-to-one"),
}

__all__ = [
    "BUILTINS", "FEATURE_TABLE", "Token", "expr_text", "load", "parse",
    "parse_expression", "parse_tokens", "resolve", "to_source", "tokenize",
]
