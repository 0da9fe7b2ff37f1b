import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, sample
from progen import random_program
from conpro_hls.diagnostics import CompileError
from conpro_hls.frontend import ast as A
from conpro_hls.frontend import parse_module, parse_source, print_module, tokenize, untokenize


def kinds(src):
    return [(t.kind, t.text) for t in tokenize(src) if t.kind != "eof"]


def test_minimal_assignment_tokens():
    assert kinds("d <- 0;") == [("identifier", "d"), ("operator", "<-"),
                                ("integer-literal", "0"), ("punctuation", ";")]


def test_binary_logic_literal():
    t = tokenize("0b0001")[0]
    assert (t.kind, t.value, t.width) == ("logic-literal", 1, 4)


def test_time_units_are_keywords():
    ks = kinds("wait for 500 millisec;")
    assert [k for k, _ in ks] == ["keyword", "keyword", "integer-literal", "keyword", "punctuation"]


def test_untokenize_is_lossless():
    for name in CORPUS:
        src = sample(name)
        assert untokenize(tokenize(src)).rstrip() == src.rstrip()


def test_ex3_fragment_has_three_top_statements():
    m = parse_source(sample("ex3"))
    procs = [d for d in m.decls if isinstance(d, A.ProcessDef)]
    # the register declaration, the initial assignment and the for-loop
    assert len(procs) == 1 and len(procs[0].decls) + len(procs[0].body) == 3


def test_process_array_node():
    m = parse_source("array p: process[4] of begin reg x: int[4]; x <- #; end;")
    (p,) = m.decls
    assert isinstance(p, A.ProcessDef) and p.size.value == 4
    assert any(isinstance(n, A.SelfIndex) for s in p.body for n in s.walk())


def test_empty_input():
    assert parse_source("").decls == []


def test_syntax_error_has_location_and_expectation():
    with pytest.raises(CompileError) as e:
        parse_source("process main: begin x <- ; end;", "bad.cp")
    d = e.value.diagnostics[0]
    assert (d.loc.file, d.loc.line) == ("bad.cp", 1)
    assert "expected" in d.message


def test_structural_modules_rejected():
    with pytest.raises(CompileError, match="out of scope"):
        parse_source("module m: begin end;")


def test_include_left_to_driver():
    with pytest.raises(CompileError, match="include"):
        parse_source('include "other";')


def roundtrip(src):
    m = parse_source(src)
    again = parse_source(print_module(m))
    assert again == m


@pytest.mark.parametrize("name", CORPUS)
def test_roundtrip_corpus(name):
    roundtrip(sample(name))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_roundtrip_random_programs(seed):
    roundtrip(random_program(seed))


TOP_LEVEL_OK = (A.Open, A.Export, A.TypeDef, A.ObjDef, A.AbstractDef, A.ArrayDef, A.ComponentDef,
                A.ExceptionDef, A.ProcessDef, A.FunctionDef)


@pytest.mark.parametrize("name", CORPUS)
def test_statements_only_inside_bodies(name):
    m = parse_module(tokenize(sample(name)))
    for d in m.decls:
        if isinstance(d, A.TopStmt):
            assert isinstance(d.stmt, (A.MethodCall, A.For))
        else:
            assert isinstance(d, TOP_LEVEL_OK)
