import pytest
from hypothesis import given, settings, strategies as st

from specjit.corpus import generate_program, inputs_for
from specjit.errors import LexError, ParseError, ResolveError
from specjit.frontend import FEATURE_TABLE, ast as A, load, parse, to_source, tokenize
from specjit.frontend.lexer import UNSUPPORTED_WORDS


def test_tokenize_numbers_and_comments():
    toks = tokenize("let x = 1.5e2 // trailing\nlet y = 3")
    kinds = [t.kind for t in toks]
    assert "FLOAT" in kinds and "INT" in kinds
    assert [t.value for t in toks if t.kind == "FLOAT"] == [150.0]


def test_int_literal_range():
    with pytest.raises(LexError):
        load("let x = 9223372036854775808")


def test_unterminated_string():
    with pytest.raises(LexError):
        load('print("abc)')


@pytest.mark.parametrize("word", sorted(UNSUPPORTED_WORDS))
def test_unsupported_words_name_the_feature(word):
    with pytest.raises(ParseError) as e:
        load(f"{word} x")
    assert word in str(e.value)


def test_feature_table_productions_parse():
    src = """
let g = 1
let r = record { a: 1, b: [1.0, 2.0] }
fn f(x, y) {
  global g
  g = g + 1
  r.a = x
  r.b[0] = r.b[1]
  let z = -x
  if x < y and not false {
    return z
  } else {
    z = z * 2
  }
  while z < 10 {
    z = z + 1
    if z == 5 {
      continue
    }
    if z == 8 {
      break
    }
  }
  for i in range(3) {
    print(i)
  }
  assert z >= 0 or true
  return z ** 2
}
print(f(1, 2))
"""
    prog = load(src)
    seen = {type(n).__name__ for n in A.walk(prog)}
    for needed in ("FnDef", "Let", "Assign", "AttrAssign", "SubscrAssign", "GlobalDecl", "If",
                   "While", "ForIn", "Return", "Break", "Continue", "Assert", "ExprStmt",
                   "RecordLit", "ListLit", "Call", "AttrGet", "SubscrGet", "UnOp", "BinOp"):
        assert needed in seen, needed
    assert len(FEATURE_TABLE) >= 20


def test_precedence():
    prog = parse("let v = 1 + 2 * 3 ** 2")
    e = prog.body[0].value
    assert e.op == "+" and e.right.op == "*" and e.right.right.op == "**"


def test_resolve_errors():
    with pytest.raises(ResolveError):
        load("break")
    with pytest.raises(ResolveError):
        load("return 1")
    with pytest.raises(ResolveError):
        load("fn f(x) { global x }")
    with pytest.raises(ResolveError):
        load("let len = 3")


def test_duplicate_params():
    with pytest.raises(ParseError):
        load("fn f(a, a) { return a }")


def test_scopes_resolved():
    prog = load("let g = 1\nfn f(p) { let q = p + g\n return len([q]) }")
    names = {n.name: n.scope for n in A.walk(prog) if type(n) is A.Name}
    assert names["p"] == A.PARAM
    assert names["g"] == A.GLOBAL
    assert names["q"] == A.LOCAL
    assert names["len"] == A.BUILTIN


def test_sites_are_unique():
    prog = load(generate_program(5).render("[1, 1.0, []]"))
    sites = [n.site for n in A.walk(prog) if getattr(n, "site", None) is not None]
    assert len(sites) == len(set(sites))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_print_parse_roundtrip(seed):
    p = generate_program(seed)
    src = p.render(inputs_for(p)[0])
    once = to_source(load(src))
    assert to_source(load(once)) == once
