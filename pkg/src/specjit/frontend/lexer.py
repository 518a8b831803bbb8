"""Tokenizer for SL source text."""

from __future__ import annotations

from dataclasses import dataclass

from specjit.errors import LexError, SourceSpan

KEYWORDS = {
    "fn": "FN", "let": "LET", "if": "IF", "else": "ELSE", "while": "WHILE",
    "for": "FOR", "in": "IN", "return": "RETURN", "break": "BREAK",
    "continue": "CONTINUE", "assert": "ASSERT", "global": "GLOBAL",
    "true": "TRUE", "false": "FALSE", "nil": "NIL", "and": "AND", "or": "OR",
    "not": "NOT", "record": "RECORD",
}

# Words reserved so that unsupported host-language features are rejected
# by name instead of being parsed as identifiers.
UNSUPPORTED_WORDS = frozenset({
    "try", "except", "finally", "raise", "with", "yield", "async", "await",
    "import", "from", "class", "lambda", "del",
})

# Longest match first.
OPERATORS = [
    ("**", "STARSTAR"), ("==", "EQEQ"), ("!=", "NE"), ("<=", "LE"), (">=", "GE"),
    ("+", "PLUS"), ("-", "MINUS"), ("*", "STAR"), ("/", "SLASH"), ("%", "PERCENT"),
    ("<", "LT"), (">", "GT"), ("=", "EQ"), (".", "DOT"), (",", "COMMA"),
    (":", "COLON"), (";", "SEMI"), ("(", "LPAREN"), (")", "RPAREN"),
    ("[", "LBRACK"), ("]", "RBRACK"), ("{", "LBRACE"), ("}", "RBRACE"),
]

INT_MAX = 2**63 - 1


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    span: SourceSpan

    def __repr__(self):
        if self.value is None:
            return self.kind
        return f"{self.kind}({self.value})"


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, ending with a single EOF token.

    Newlines are significant as statement terminators except inside
    parentheses and brackets, where they are dropped.
    """
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    depth = 0
    n = len(source)

    def span(length):
        return SourceSpan(line, col, length)

    while i < n:
        c = source[i]
        if c == "\n":
            if depth == 0 and tokens and tokens[-1].kind != "NEWLINE":
                tokens.append(Token("NEWLINE", None, span(1)))
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if is_float:
                tokens.append(Token("FLOAT", float(text), span(j - i)))
            else:
                value = int(text)
                if value > INT_MAX:
                    raise LexError("integer literal out of 64-bit range", span(j - i))
                tokens.append(Token("INT", value, span(j - i)))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = KEYWORDS.get(word)
            if kind is not None:
                tokens.append(Token(kind, None, span(j - i)))
            else:
                tokens.append(Token("NAME", word, span(j - i)))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            chars = []
            while True:
                if j >= n or source[j] == "\n":
                    raise LexError("unterminated string literal", span(j - i))
                ch = source[j]
                if ch == '"':
                    break
                if ch == "\\" and j + 1 < n:
                    esc = source[j + 1]
                    chars.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                    continue
                chars.append(ch)
                j += 1
            tokens.append(Token("STRING", "".join(chars), span(j + 1 - i)))
            col += j + 1 - i
            i = j + 1
            continue
        for text, kind in OPERATORS:
            if source.startswith(text, i):
                if kind in ("LPAREN", "LBRACK"):
                    depth += 1
                elif kind in ("RPAREN", "RBRACK"):
                    depth = max(0, depth - 1)
                tokens.append(Token(kind, None, span(len(text))))
                i += len(text)
                col += len(text)
                break
        else:
            raise LexError(f"illegal character {c!r}", span(1))
    tokens.append(Token("EOF", None, SourceSpan(line, col, 0)))
    return tokens
