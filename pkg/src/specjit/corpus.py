"""Random SL program generator for oracle-equivalence testing.

Each corpus program defines a few globals, optional helper functions and a
``main(a, x, xs)`` function, then calls ``main`` several times from a
top-level driver that reads its arguments from a global ``INPUT`` list. The
same template is rendered with different ``INPUT`` values.

Programs are typed while they are generated (Int, Float, Bool, List of
Float), so most runs finish normally, but runtime errors are allowed: both
execution modes must then fail the same way.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

DRIVER_CALLS = 7
FLOATS = ("0.5", "1.25", "-2.0", "3.0", "0.125", "2.5", "-0.75", "1.0")


@dataclass
class CorpusProgram:
    name: str
    seed: int
    template: str  # contains the placeholder {INPUT}

    def render(self, inp: str) -> str:
        return self.template.replace("{INPUT}", inp)


class _Fn:
    def __init__(self, name, params, ret):
        self.name = name
        self.params = params  # list of (name, type)
        self.ret = ret


class _Writer:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.lines: list[str] = []
        self.indent = 0
        self.counter = 0
        self.helpers: list[_Fn] = []
        self.in_loop = 0
        self.stmt_budget = 0
        self.scope: dict[str, str] = {}
        self.lists_nonempty: set[str] = set()
        self.readonly: set[str] = set()
        self.global_names: set[str] = set()
        self.iterating: set[str] = set()

    def fresh(self, prefix):
        self.counter += 1
        return f"{prefix}{self.counter}"

    def emit(self, text):
        self.lines.append("  " * self.indent + text)

    def chance(self, p) -> bool:
        return self.rng.random() < p

    def vars_of(self, t):
        return sorted(n for n, ty in self.scope.items() if ty == t)

    # -- expressions ---------------------------------------------------------------

    def int_expr(self, d=2) -> str:
        r = self.rng
        opts = ["lit", "lit"]
        if self.vars_of("int"):
            opts += ["var"] * 3
        if self.vars_of("list"):
            opts.append("len")
        if d > 0:
            opts += ["bin", "bin", "mod"]
        opts.append("gattr")
        c = r.choice(opts)
        if c == "lit":
            return str(r.randint(-3, 9))
        if c == "var":
            return r.choice(self.vars_of("int"))
        if c == "len":
            return f"len({r.choice(self.vars_of('list'))})"
        if c == "gattr":
            return "R.n"
        if c == "mod":
            return f"({self.int_expr(d - 1)}) % {r.randint(2, 5)}"
        op = r.choice(["+", "-", "*"])
        return f"({self.int_expr(d - 1)} {op} {self.int_expr(d - 1)})"

    def float_expr(self, d=2) -> str:
        r = self.rng
        opts = ["lit"]
        if self.vars_of("float"):
            opts += ["var"] * 3
        if d > 0:
            opts += ["bin", "bin", "mix", "div", "neg"]
            if self.helpers:
                opts.append("call")
        opts.append("gattr")
        if d > 0 and self.chance(0.08):
            opts.append("tensor")
        c = r.choice(opts)
        if c == "lit":
            return r.choice(FLOATS)
        if c == "var":
            return r.choice(self.vars_of("float"))
        if c == "gattr":
            return "R.v"
        if c == "neg":
            return f"-({self.float_expr(d - 1)})"
        if c == "div":
            return f"({self.float_expr(d - 1)} / {r.choice(['2.0', '4.0', '-0.5'])})"
        if c == "mix":
            return f"({self.int_expr(d - 1)} * {r.choice(FLOATS)})"
        if c == "tensor":
            fn = r.choice(["sum", "mean"])
            inner = r.choice(["tanh", "relu", "exp"])
            return f"{fn}({inner}(tensor([{self.float_expr(0)}, {r.choice(FLOATS)}])))"
        if c == "call":
            h = r.choice(self.helpers)
            args = [self.float_expr(0) if t == "float" else self.int_expr(0) for _, t in h.params]
            return f"{h.name}({', '.join(args)})"
        op = r.choice(["+", "-", "*"])
        return f"({self.float_expr(d - 1)} {op} {self.float_expr(d - 1)})"

    def bool_expr(self, d=2) -> str:
        r = self.rng
        opts = ["icmp", "icmp", "fcmp", "lit"]
        if self.vars_of("bool"):
            opts += ["var", "var"]
        opts.append("flag")
        if d > 0:
            opts += ["and", "or", "not"]
        c = r.choice(opts)
        if c == "lit":
            return r.choice(["true", "false"])
        if c == "var":
            return r.choice(self.vars_of("bool"))
        if c == "flag":
            return "FLAG"
        if c == "icmp":
            return f"{self.int_expr(1)} {r.choice(['<', '<=', '>', '>=', '==', '!='])} {self.int_expr(1)}"
        if c == "fcmp":
            return f"{self.float_expr(1)} {r.choice(['<', '>', '<=', '>='])} {self.float_expr(1)}"
        if c == "not":
            return f"not ({self.bool_expr(d - 1)})"
        return f"({self.bool_expr(d - 1)}) {c} ({self.bool_expr(d - 1)})"

    def expr_of(self, t) -> str:
        return {"int": self.int_expr, "float": self.float_expr, "bool": self.bool_expr}[t]()

    # -- statements -----------------------------------------------------------------

    def block(self, n, fn_level=False):
        for _ in range(n):
            if self.stmt_budget <= 0:
                return
            self.stmt(fn_level)

    def sub_block(self, n):
        """A nested block; variables it introduces are dropped afterwards."""
        saved = dict(self.scope)
        saved_ne = set(self.lists_nonempty)
        self.indent += 1
        self.block(n)
        self.indent -= 1
        self.scope = saved
        self.lists_nonempty = saved_ne

    def growable(self):
        # appending to a list that a loop is walking would never terminate
        return [n for n in self.vars_of("list") if n not in self.iterating]

    def assignable(self):
        return sorted(n for n, t in self.scope.items() if t in ("int", "float", "bool") and n not in self.readonly)

    def stmt(self, fn_level):
        r = self.rng
        self.stmt_budget -= 1
        kinds = ["let", "let", "assign", "assign", "if", "for", "while", "print", "attr", "list"]
        if self.growable():
            kinds.append("append")
        if self.vars_of("list"):
            kinds.append("subscr")
        if "G" in self.global_names:
            kinds.append("global")
        if fn_level and not self.in_loop:
            kinds.append("ret")
        if self.in_loop:
            kinds.append("brk")
        kinds.append("assert")
        k = r.choice(kinds)
        if k == "let" or (k == "assign" and not self.assignable()):
            t = r.choice(["int", "float", "float", "bool"])
            name = self.fresh(t[0])
            self.emit(f"let {name} = {self.expr_of(t)}")
            self.scope[name] = t
        elif k == "assign":
            name = r.choice(self.assignable())
            self.emit(f"{name} = {self.expr_of(self.scope[name])}")
        elif k == "if":
            self.emit(f"if {self.bool_expr()} {{")
            self.sub_block(r.randint(1, 3))
            if self.chance(0.5):
                self.emit("} else {")
                self.sub_block(r.randint(1, 3))
            self.emit("}")
        elif k == "ret":
            self.emit(f"if {self.bool_expr()} {{")
            self.indent += 1
            self.emit(f"return {self.float_expr()}")
            self.indent -= 1
            self.emit("}")
        elif k == "for":
            v = self.fresh("i")
            lists = self.vars_of("list")
            if lists and self.chance(0.4):
                src = r.choice(lists)
                self.emit(f"for {v} in {src} {{")
                vt = "float"
                self.iterating.add(src)
            else:
                bound = str(r.randint(0, 5)) if self.chance(0.6) else f"({self.int_expr(1)}) % 4 + 1"
                self.emit(f"for {v} in range({bound}) {{")
                vt = "int"
            self.in_loop += 1
            self.scope[v] = vt
            self.readonly.add(v)
            self.sub_block(r.randint(1, 3))
            self.readonly.discard(v)
            self.scope.pop(v, None)
            if vt == "float":
                self.iterating.discard(src)
            self.in_loop -= 1
            self.emit("}")
        elif k == "while":
            w = self.fresh("w")
            bound = str(r.randint(0, 4)) if self.chance(0.5) else f"({self.int_expr(1)}) % 3 + 1"
            self.emit(f"let {w} = 0")
            self.emit(f"while {w} < {bound} {{")
            self.in_loop += 1
            self.scope[w] = "int"
            self.readonly.add(w)
            self.indent += 1
            # increment first so that a generated `continue` cannot spin forever
            self.emit(f"{w} = {w} + 1")
            self.indent -= 1
            self.sub_block(r.randint(1, 3))
            self.in_loop -= 1
            self.emit("}")
        elif k == "print":
            args = [self.expr_of(r.choice(["int", "float", "bool"])) for _ in range(r.randint(1, 2))]
            if self.chance(0.3):
                args.insert(0, '"v"')
            self.emit(f"print({', '.join(args)})")
        elif k == "attr":
            if self.chance(0.5):
                self.emit(f"R.v = {self.float_expr()}")
            else:
                self.emit(f"R.n = {self.int_expr()}")
        elif k == "list":
            name = self.fresh("l")
            items = [self.float_expr(1) for _ in range(r.randint(0, 3))]
            self.emit(f"let {name} = [{', '.join(items)}]")
            self.scope[name] = "list"
            if items:
                self.lists_nonempty.add(name)
        elif k == "append":
            self.emit(f"append({r.choice(self.growable())}, {self.float_expr(1)})")
        elif k == "subscr":
            ne = sorted(self.lists_nonempty & set(self.vars_of("list")))
            if ne:
                name = r.choice(ne)
                self.emit(f"{name}[0] = {name}[0] + {self.float_expr(1)}")
            else:
                name = r.choice(self.vars_of("list"))
                self.emit(f"if len({name}) > 0 {{")
                self.indent += 1
                self.emit(f"{name}[len({name}) - 1] = {self.float_expr(1)}")
                self.indent -= 1
                self.emit("}")
        elif k == "global":
            self.emit(f"G = G + {self.int_expr(1)}")
        elif k == "brk":
            self.emit(f"if {self.bool_expr(1)} {{")
            self.indent += 1
            self.emit(r.choice(["break", "continue"]))
            self.indent -= 1
            self.emit("}")
        elif k == "assert":
            if self.chance(0.1):
                self.emit(f"assert {self.bool_expr(1)}")
            else:
                self.emit("assert R.n == R.n")

    # -- functions ----------------------------------------------------------------------

    def function(self, fn: _Fn, n_stmts, extra_header=()):
        params = ", ".join(p for p, _ in fn.params)
        self.emit(f"fn {fn.name}({params}) {{")
        self.indent += 1
        for line in extra_header:
            self.emit(line)
        self.scope = dict(fn.params)
        self.lists_nonempty = set()
        self.readonly = set()
        self.stmt_budget = n_stmts
        self.block(n_stmts, fn_level=True)
        self.emit(f"return {self.float_expr()}")
        self.indent -= 1
        self.emit("}")


def generate_program(seed: int) -> CorpusProgram:
    rng = random.Random(seed)
    w = _Writer(rng)
    w.emit("let G = 0")
    w.emit(f"let FLAG = {rng.choice(['true', 'false'])}")
    w.emit("let R = record { v: 0.5, n: 1 }")
    for h in range(rng.randint(0, 2)):
        fn = _Fn(f"h{h}", [("p", "float"), ("q", "int")], "float")
        w.function(fn, rng.randint(1, 4))
        w.helpers.append(fn)
    recursive = rng.random() < 0.25
    if recursive:
        w.emit("fn down(n, acc) {")
        w.emit("  if n <= 0 {")
        w.emit("    return acc")
        w.emit("  }")
        w.emit("  return down(n - 1, acc * 0.5 + 1.0)")
        w.emit("}")
    header = []
    w.global_names = set()
    if rng.random() < 0.5:
        header.append("global G")
        w.global_names.add("G")
    main = _Fn("main", [("a", "int"), ("x", "float"), ("xs", "list")], "float")
    body_lines_start = len(w.lines)
    w.function(main, rng.randint(3, 9), header)
    if recursive:
        # splice a recursive call just before main's final return
        ret = w.lines.pop()
        last = w.lines.pop()
        w.lines.append("  let rr = down(a % 6, x)")
        w.lines.append("  print(rr)")
        w.lines.append(last)
        w.lines.append(ret)
    if rng.random() < 0.1 and len(w.lines) > body_lines_start + 2:
        # a nested function with a capture keeps main on the interpreter
        w.lines.insert(body_lines_start + 1 + len(header), "  fn inner(z) { return z + x }")
    w.emit("let INPUT = {INPUT}")
    w.emit("let A0 = INPUT[0]")
    w.emit("let X0 = INPUT[1]")
    w.emit("let XS = INPUT[2]")
    w.emit(f"for k in range({DRIVER_CALLS}) {{")
    w.emit("  if k == 5 {")
    w.emit("    append(XS, 2.5)")
    w.emit("  }")
    w.emit("  print(main(A0 + k % 2, X0 + 1.0 * k, XS))")
    w.emit("}")
    w.emit("print(G, R.v, R.n, len(XS))")
    return CorpusProgram(f"corpus{seed:04d}", seed, "\n".join(w.lines) + "\n")


def random_input(rng: random.Random) -> str:
    a = rng.randint(0, 6)
    x = rng.choice(FLOATS)
    xs = ", ".join(rng.choice(FLOATS) for _ in range(rng.randint(0, 4)))
    return f"[{a}, {x}, [{xs}]]"


def inputs_for(program: CorpusProgram, k: int = 5) -> list[str]:
    rng = random.Random(program.seed * 7919 + 1)
    return [random_input(rng) for _ in range(k)]


def corpus(n: int = 220, seed: int = 0) -> list[CorpusProgram]:
    return [generate_program(seed + i) for i in range(n)]


__all__ = ["CorpusProgram", "DRIVER_CALLS", "corpus", "generate_program", "inputs_for"]
