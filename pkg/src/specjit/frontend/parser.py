"""Recursive-descent statement parser with precedence climbing for expressions.

Precedence, loosest first::

    or < and < not < comparisons < + - < * / % < unary minus < ** < postfix

``**`` is right-associative and its right operand may carry a unary minus.
"""

from __future__ import annotations

from specjit.errors import ParseError
from specjit.frontend import ast as A
from specjit.frontend.lexer import UNSUPPORTED_WORDS, Token, tokenize

COMPARISONS = {"EQEQ": "==", "NE": "!=", "LT": "<", "LE": "<=", "GT": ">", "GE": ">="}
ADDITIVE = {"PLUS": "+", "MINUS": "-"}
MULTIPLICATIVE = {"STAR": "*", "SLASH": "/", "PERCENT": "%"}

_DESCRIBE = {
    "NAME": "identifier", "EOF": "end of input", "NEWLINE": "end of line",
    "LBRACE": "'{'", "RBRACE": "'}'", "LPAREN": "'('", "RPAREN": "')'",
    "LBRACK": "'['", "RBRACK": "']'", "EQ": "'='", "COMMA": "','", "COLON": "':'",
}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, *kinds) -> bool:
        return self.tok.kind in kinds

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind, what=None) -> Token:
        if self.tok.kind != kind:
            self.error(f"expected {what or _DESCRIBE.get(kind, kind.lower())}")
        return self.advance()

    def error(self, message):
        tok = self.tok
        found = _DESCRIBE.get(tok.kind, repr(tok))
        raise ParseError(f"{message}, found {found}", tok.span)

    def skip_newlines(self):
        while self.tok.kind == "NEWLINE":
            self.advance()

    def end_statement(self):
        if self.at("NEWLINE", "SEMI"):
            while self.at("NEWLINE", "SEMI"):
                self.advance()
        elif not self.at("RBRACE", "EOF") and not (self.pos > 0 and self.tokens[self.pos - 1].kind == "RBRACE"):
            # a closing brace also ends a statement: `if c { ... } return x`
            self.error("expected end of statement")

    # -- statements ----------------------------------------------------------

    def program(self) -> A.Program:
        start = self.tok.span
        body = []
        self.skip_newlines()
        while not self.at("EOF"):
            body.append(self.statement())
            self.end_statement()
        return A.Program(body, span=start)

    def block(self) -> list[A.AstNode]:
        self.expect("LBRACE")
        stmts = []
        while self.at("NEWLINE", "SEMI"):
            self.advance()
        while not self.at("RBRACE"):
            if self.at("EOF"):
                self.error("expected '}'")
            stmts.append(self.statement())
            self.end_statement()
        self.advance()
        return stmts

    def statement(self) -> A.AstNode:
        tok = self.tok
        kind = tok.kind
        span = tok.span
        if kind == "NAME" and tok.value in UNSUPPORTED_WORDS:
            raise ParseError(f"unsupported feature: '{tok.value}'", span)
        if kind == "FN":
            self.advance()
            name = self.expect("NAME", "function name").value
            self.expect("LPAREN")
            params = []
            seen = set()
            while not self.at("RPAREN"):
                ptok = self.expect("NAME", "parameter name")
                if ptok.value in seen:
                    raise ParseError(f"duplicate parameter '{ptok.value}'", ptok.span)
                seen.add(ptok.value)
                params.append(A.Param(ptok.value, span=ptok.span))
                if not self.at("RPAREN"):
                    self.expect("COMMA", "',' or ')'")
            self.advance()
            return A.FnDef(name, params, self.block(), span=span)
        if kind == "LET":
            self.advance()
            name = self.expect("NAME", "variable name").value
            self.expect("EQ", "'='")
            return A.Let(name, self.expression(), span=span)
        if kind == "GLOBAL":
            self.advance()
            return A.GlobalDecl(self.expect("NAME", "variable name").value, span=span)
        if kind == "IF":
            return self.if_statement()
        if kind == "WHILE":
            self.advance()
            cond = self.expression()
            return A.While(cond, self.block(), span=span)
        if kind == "FOR":
            self.advance()
            var = self.expect("NAME", "loop variable").value
            self.expect("IN", "'in'")
            it = self.expression()
            return A.ForIn(var, it, self.block(), span=span)
        if kind == "RETURN":
            self.advance()
            if self.at("NEWLINE", "SEMI", "RBRACE", "EOF"):
                return A.Return(None, span=span)
            return A.Return(self.expression(), span=span)
        if kind == "BREAK":
            self.advance()
            return A.Break(span=span)
        if kind == "CONTINUE":
            self.advance()
            return A.Continue(span=span)
        if kind == "ASSERT":
            self.advance()
            return A.Assert(self.expression(), span=span)
        expr = self.expression()
        if self.at("EQ"):
            self.advance()
            value = self.expression()
            if isinstance(expr, A.Name):
                return A.Assign(expr.name, value, span=span)
            if isinstance(expr, A.AttrGet):
                return A.AttrAssign(expr.obj, expr.name, value, span=span)
            if isinstance(expr, A.SubscrGet):
                return A.SubscrAssign(expr.obj, expr.index, value, span=span)
            raise ParseError("invalid assignment target", span)
        return A.ExprStmt(expr, span=span)

    def if_statement(self) -> A.If:
        span = self.expect("IF").span
        cond = self.expression()
        then = self.block()
        orelse = None
        save = self.pos
        self.skip_newlines()
        if not self.at("ELSE"):
            self.pos = save
        if self.at("ELSE"):
            self.advance()
            if self.at("IF"):
                orelse = [self.if_statement()]
            else:
                orelse = self.block()
        return A.If(cond, then, orelse, span=span)

    # -- expressions ---------------------------------------------------------

    def expression(self) -> A.AstNode:
        return self.or_expr()

    def _binary_chain(self, sub, table):
        left = sub()
        while self.tok.kind in table:
            tok = self.advance()
            self.skip_newlines()
            right = sub()
            left = A.BinOp(table[tok.kind], left, right, span=tok.span)
        return left

    def or_expr(self):
        return self._binary_chain(self.and_expr, {"OR": "or"})

    def and_expr(self):
        return self._binary_chain(self.not_expr, {"AND": "and"})

    def not_expr(self):
        if self.at("NOT"):
            tok = self.advance()
            return A.UnOp("not", self.not_expr(), span=tok.span)
        return self.comparison()

    def comparison(self):
        return self._binary_chain(self.additive, COMPARISONS)

    def additive(self):
        return self._binary_chain(self.multiplicative, ADDITIVE)

    def multiplicative(self):
        return self._binary_chain(self.unary, MULTIPLICATIVE)

    def unary(self):
        if self.at("MINUS"):
            tok = self.advance()
            return A.UnOp("-", self.unary(), span=tok.span)
        return self.power()

    def power(self):
        base = self.postfix()
        if self.at("STARSTAR"):
            tok = self.advance()
            self.skip_newlines()
            exponent = self.unary()  # right-associative, admits unary minus
            return A.BinOp("**", base, exponent, span=tok.span)
        return base

    def postfix(self):
        expr = self.primary()
        while True:
            if self.at("LPAREN"):
                tok = self.advance()
                args = []
                while not self.at("RPAREN"):
                    args.append(self.expression())
                    if not self.at("RPAREN"):
                        self.expect("COMMA", "',' or ')'")
                self.advance()
                expr = A.Call(expr, args, span=tok.span)
            elif self.at("DOT"):
                tok = self.advance()
                name = self.expect("NAME", "attribute name").value
                expr = A.AttrGet(expr, name, span=tok.span)
            elif self.at("LBRACK"):
                tok = self.advance()
                index = self.expression()
                self.expect("RBRACK")
                expr = A.SubscrGet(expr, index, span=tok.span)
            else:
                return expr

    def primary(self):
        tok = self.tok
        kind = tok.kind
        if kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return A.Literal(tok.value, span=tok.span)
        if kind == "TRUE":
            self.advance()
            return A.Literal(True, span=tok.span)
        if kind == "FALSE":
            self.advance()
            return A.Literal(False, span=tok.span)
        if kind == "NIL":
            self.advance()
            return A.Literal(None, span=tok.span)
        if kind == "NAME":
            if tok.value in UNSUPPORTED_WORDS:
                raise ParseError(f"unsupported feature: '{tok.value}'", tok.span)
            self.advance()
            return A.Name(tok.value, span=tok.span)
        if kind == "LPAREN":
            self.advance()
            expr = self.expression()
            self.expect("RPAREN")
            return expr
        if kind == "LBRACK":
            self.advance()
            items = []
            while not self.at("RBRACK"):
                items.append(self.expression())
                if not self.at("RBRACK"):
                    self.expect("COMMA", "',' or ']'")
            self.advance()
            return A.ListLit(items, span=tok.span)
        if kind == "RECORD":
            self.advance()
            self.expect("LBRACE")
            fields = []
            seen = set()
            self.skip_newlines()
            while not self.at("RBRACE"):
                ftok = self.expect("NAME", "field name")
                if ftok.value in seen:
                    raise ParseError(f"duplicate record field '{ftok.value}'", ftok.span)
                seen.add(ftok.value)
                self.expect("COLON")
                self.skip_newlines()
                fields.append(A.RecordField(ftok.value, self.expression(), span=ftok.span))
                self.skip_newlines()
                if not self.at("RBRACE"):
                    self.expect("COMMA", "',' or '}'")
                    self.skip_newlines()
            self.advance()
            return A.RecordLit(fields, span=tok.span)
        self.error("expected expression")


def parse_tokens(tokens: list[Token]) -> A.Program:
    program = Parser(tokens).program()
    return A.assign_sites(program)


def parse(source: str) -> A.Program:
    """Tokenize and parse ``source``; site ids are assigned in pre-order."""
    return parse_tokens(tokenize(source))


def parse_expression(source: str) -> A.AstNode:
    parser = Parser(tokenize(source))
    expr = parser.expression()
    parser.skip_newlines()
    if not parser.at("EOF"):
        parser.error("unexpected trailing input")
    return expr
