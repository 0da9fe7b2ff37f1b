from hypothesis import given, settings, strategies as st

from conftest import sample
from progen import random_program
from conpro_hls.frontend import ast as A
from conpro_hls.frontend import parse_source, print_stmts
from conpro_hls.rsopt import flush, optimize_process, tracked_registers
from conpro_hls.sema import analyze
from conpro_hls.sim import interpret_ast


def process(src):
    tm = analyze(parse_source(src))
    return tm, tm.process("main")


def optimized(src, live=None, dump=None):
    tm, p = process(src)
    return optimize_process(p.body, tracked_registers(tm, p), live, dump)


def text(stmts):
    return [ln.strip() for ln in print_stmts(stmts).splitlines() if ln.strip()]


EX4 = """process main:
begin
  reg a, b, c, x, y : int[8];
  x <- a + b + 1;
  y <- x + 1 + c;
  x <- y - 2;
end;"""


def run(stmts, init, tm, p):
    return dict(interpret_ast(stmts, store=dict(init), tm=tm, proc=p.name))


def test_ex4_y_live():
    out = optimized(EX4, {"x", "y"})
    assert len(out) == 2
    y, x = out
    assert (y.target.id, x.target.id) == ("y", "x")
    # y is the three-operand sum with the +1 +1 constants merged
    assert text([y]) == ["y <- (((a + b) + c) + 2);"]
    # x reads the flushed y, so the chain collapses to a+b+c
    assert text([x]) == ["x <- (y - 2);"]


def test_ex4_y_dead():
    assert text(optimized(EX4, {"x"})) == ["x <- ((a + b) + c);"]


def test_ex4_nothing_live():
    assert optimized(EX4, set()) == []


def test_ex4_values_match_sequential():
    tm, p = process(EX4)
    init = {"a": 1, "b": 2, "c": 3}
    ref = run(p.body, init, tm, p)
    got = run(optimized(EX4, {"x", "y"}), init, tm, p)
    assert (ref["x"], ref["y"]) == (got["x"], got["y"]) == (6, 8)


FLUSH = """process main:
begin
  reg a, v, x, y : int[8];
  x <- 12; y <- x + 1; x <- v; a <- y - 1;
end;"""


def test_flush_with_relocation():
    assert text(optimized(FLUSH)) == ["y <- 13;", "a <- 12;", "x <- v;"]


def test_flush_leaves_rs_self_on_top():
    from conpro_hls.rsopt import RSSelf, ReferenceStackState
    from conpro_hls.sema.types import INT, T
    ty = T(INT, 8)
    st = ReferenceStackState({"x": ty, "y": ty})
    st.assign("x", A.Num(3, ty=ty))
    st.assign("y", A.Binary("+", st.read("x", ty), A.Num(1, ty=ty), ty=ty))
    out = flush(st)
    assert text(out) == ["x <- 3;", "y <- 4;"]
    assert all(isinstance(s[-1], RSSelf) for s in st.stacks.values())
    assert not st.pending


def test_dump_lists_stacks_top_first():
    dump = []
    optimized(EX4, {"x", "y"}, dump)
    assert dump[0].startswith("-- flush at")
    x_line = next(d for d in dump if d.startswith("x:"))
    assert x_line.index("y0") < x_line.index("(a + b)")


def test_swap_through_temporary_becomes_bound_block():
    out = optimized("""process main:
begin
  reg t, x, y : int[8];
  t <- x; x <- y; y <- t;
end;""", {"x", "y"})
    assert len(out) == 1 and isinstance(out[0], A.Bind)


def test_queue_access_is_a_barrier():
    out = optimized("""queue q : int[8];
process main:
begin
  reg x : int[8];
  x <- 1;
  q <- x;
  x <- 2;
end;""")
    lines = text(out)
    assert lines.index("x <- 1;") < lines.index("q <- x;") < lines.index("x <- 2;")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**7))
def test_semantic_preservation(seed):
    tm, p = process(random_program(seed))
    ref = dict(interpret_ast(p.body, tm=tm, proc="main"))
    out = optimize_process(p.body, tracked_registers(tm, p))
    assert dict(interpret_ast(out, tm=tm, proc="main")) == ref


OPS = ["+", "-", "land", "lor", "lxor"]


@st.composite
def straight_line(draw):
    names = ["a", "b", "c", "d"]
    lines = []
    for _ in range(draw(st.integers(1, 8))):
        t = draw(st.sampled_from(names))
        lhs = draw(st.sampled_from(names + ["1", "2", "7"]))
        rhs = draw(st.sampled_from(names + ["1", "3"]))
        lines.append(f"  {t} <- {lhs} {draw(st.sampled_from(OPS))} {rhs};")
    return "process main:\nbegin\n  reg a, b, c, d : int[8];\n" + "\n".join(lines) + "\nend;"


def count_assigns(stmts):
    return sum(1 for s in stmts for n in s.walk() if isinstance(n, A.Assign))


@settings(max_examples=200, deadline=None)
@given(straight_line(), st.sets(st.sampled_from("abcd")))
def test_straight_line_monotone_and_correct(src, live):
    tm, p = process(src)
    out = optimize_process(p.body, tracked_registers(tm, p), live)
    assert count_assigns(out) <= count_assigns(p.body)
    init = {"a": 3, "b": -5, "c": 17, "d": 100}
    ref = run(p.body, init, tm, p)
    got = run(out, init, tm, p)
    assert all(ref[k] == got[k] for k in live)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**7))
def test_no_assignment_crosses_a_referencing_branch(seed):
    """Every branch or loop that reads x sees x's value as in the original order."""
    tm, p = process(random_program(seed))
    out = optimize_process(p.body, tracked_registers(tm, p))
    for s in out:
        if isinstance(s, (A.If, A.For, A.While)):
            reads = {n.id for n in s.walk() if isinstance(n, A.Name)}
            assert not any(isinstance(n, A.Name) and n.id.startswith("$") for n in s.walk())
            assert reads  # compound statements survive with their references intact
    assert dict(interpret_ast(out, tm=tm, proc="main")) == \
        dict(interpret_ast(p.body, tm=tm, proc="main"))
