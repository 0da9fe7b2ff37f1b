import copy

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, TERMINATING, agree, compiled, local_values, sample, simulate
from progen import random_program
from conpro_hls.diagnostics import CompileError
from conpro_hls.frontend import ast as A
from conpro_hls.frontend import parse_source
from conpro_hls.pipeline import Options, compile_typed
from conpro_hls.sema import analyze, fold_constants
from conpro_hls.sema.types import INT, LOGIC


def typed(src):
    return analyze(parse_source(src))


def test_char_to_int_needs_conversion():
    with pytest.raises(CompileError, match="to_int|conversion|CHAR|char"):
        typed("process main: begin reg a: int[8]; a <- 'x'; end;")


def test_ex11_replication_yields_seven_processes():
    tm = typed(sample("ex11"))
    names = tm.process_names
    assert names == [f"philosopher_{i}" for i in range(5)] + ["main"]
    assert len(names) == 6  # inline eat adds no process


def test_value_constant_typed_per_use():
    tm = typed("""const c: value := 8;
process main: begin reg a: int[5]; reg b: logic[8]; a <- c; b <- c; end;""")
    a, b = tm.process("main").body
    assert (a.value.ty.base, a.value.ty.width) == (INT, 5)
    assert (b.value.ty.base, b.value.ty.width) == (LOGIC, 8)


def test_fold_arithmetic():
    tm = fold_constants(typed("process main: begin reg x: int[8]; x <- 2+3*4; end;"), "*")
    (s,) = tm.process("main").body
    assert isinstance(s.value, A.Num) and s.value.value == 14


def test_dead_object_removed_with_note():
    tm = fold_constants(typed("process main: begin reg u, x: int[8]; x <- 1; end;"), {"x"})
    assert "u" not in tm.process("main").locals
    assert any("'u'" in n.message and n.severity == "note" for n in tm.notes)


def ilog(v, b):
    k, p = 0, 1
    while p < v:
        p *= b
        k += 1
    return k


@pytest.mark.parametrize("v,b", [(256, 2), (100, 10), (257, 2), (1, 2), (81, 3)])
def test_log_constant(v, b):
    tm = fold_constants(typed(f"const w: value := {v}~{b};\n"
                              "process main: begin reg x: int[12]; x <- w; end;"), "*")
    (s,) = tm.process("main").body
    assert s.value.value == ilog(v, b)


def test_division_by_zero_in_constant():
    with pytest.raises(CompileError):
        fold_constants(typed("const k: value := 4/0;\nprocess main: begin reg x: int[8]; x <- k; end;"))


def _array_body(src, name):
    start = src.index(f"array {name}: process")
    body_start = src.index("begin", start)
    end = src.index("process main:", start)
    return src[body_start:end].rstrip().rstrip(";")


@pytest.mark.parametrize("i", range(5))
def test_replication_soundness(i):
    src = sample("ex11")
    body = _array_body(src, "philosopher").replace("#", str(i))
    head = src[:src.index("array philosopher: process")]
    standalone = head + f"process philosopher_{i}:\n{body};\n" + src[src.index("process main:"):]
    standalone = standalone.replace("philosopher.[i].start ()", f"philosopher_{i}.start ()")
    ref = typed(src).process(f"philosopher_{i}").body
    alone = typed(standalone).process(f"philosopher_{i}").body
    assert alone == ref


def _check_widths(tm):
    for p in tm.processes:
        for s in p.body:
            for n in s.walk():
                ty = getattr(n, "ty", None)
                if isinstance(n, A.Expr) and ty is not None:
                    assert ty.width <= 64
                if isinstance(n, A.Assign) and getattr(n.target, "ty", None) is not None:
                    assert n.target.ty.width >= 1


@pytest.mark.parametrize("name", CORPUS)
def test_width_discipline_corpus(name):
    _check_widths(typed(sample(name)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_width_discipline_random(seed):
    _check_widths(typed(random_program(seed)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_folding_preserves_semantics(seed):
    tm = analyze(parse_source(random_program(seed)))
    plain = simulate(compile_typed(copy.deepcopy(tm), Options(fold=False)))
    folded = simulate(compile_typed(fold_constants(tm, "*"), Options(fold=False)))
    assert plain.termination == folded.termination == "all-ended"
    assert agree(local_values(plain), local_values(folded))


@pytest.mark.parametrize("name", TERMINATING)
def test_folding_preserves_corpus(name):
    a = simulate(compiled(name, fold=False))
    b = simulate(compiled(name))
    ga = {k: v for k, v in a.stores.items() if "$" not in k}
    gb = {k: v for k, v in b.stores.items() if "$" not in k}
    assert a.termination == b.termination
    # folding may remove dead locals; everything that survives must agree
    assert all(ga[k] == v for k, v in gb.items() if k in ga)
