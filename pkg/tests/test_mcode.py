import copy

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, TERMINATING, agree, local_values, reference_values, sample, simulate
from progen import random_program
from conpro_hls.frontend import parse_source
from conpro_hls.mcode import (END, MCodeSyntaxError, check_program, compact, emit_text, groups,
                              lower_process, parse_alu, parse_text, step_count)
from conpro_hls.mcode.instr import step_body
from conpro_hls.pipeline import Compiled
from conpro_hls.sema import analyze, fold_constants


def lowered(src, proc="main", alu="flat", do_compact=True, fold=True):
    tm = analyze(parse_source(src))
    if fold:
        tm = fold_constants(tm)
    p = lower_process(tm, proc, parse_alu(alu))
    return compact(p) if do_compact else p


def shape(p):
    """Per step: the instruction kinds, bind headers as bindN, labels dropped."""
    out = []
    for _, instrs in groups(p.code):
        if instrs:
            out.append(tuple(f"bind{i.args[0]}" if i.op == "bind" else i.op for i in instrs))
    return out


EX3_SHAPE = [("move",), ("move",), ("bind2", "expr", "falsejump"), ("expr",),
             ("bind2", "expr", "falsejump"), ("bind3", "expr", "nop", "jump")]
EX3_LABELS = ["i1_assign", "i2_for_loop", "i2_for_loop_cond", "i3_assign", "i4_branch",
              "i2_for_loop_incr", "i2_for_loop_end"]


def test_ex3_compacted_listing():
    p = lowered(sample("ex3"))
    assert shape(p) == EX3_SHAPE
    assert p.labels() == EX3_LABELS
    jumps = [(i.op, i.target) for i in p.code if i.target]
    assert jumps == [("falsejump", END), ("falsejump", "i2_for_loop_incr"),
                     ("jump", "i2_for_loop_cond")]


def test_ex2_shape_and_loop_register():
    p = lowered(sample("ex2"), "foo")
    loop = p.decl("LOOP_i_0")
    assert loop.kind == "register" and loop.ty.suffix == "I9"
    assert p.imports[0].name == "d" and p.imports[0].ty.suffix == "L8"
    assert shape(p) == [("move",), ("move",), ("bind2", "expr", "falsejump"),
                        ("bind3", "move", "expr", "nop"), ("bind2", "expr", "expr"),
                        ("bind3", "expr", "nop", "jump")]


def test_bound_block_group():
    p = lowered("process main: begin reg a, b, d: logic[8]; a <- d, b <- d+1; end;", fold=False)
    text = emit_text(p)
    assert "bind (3)\n    move (a,d)\n    expr (b,d,+,1)\n    nop" in text


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("do_compact", [False, True])
def test_text_roundtrip_corpus(name, do_compact):
    tm = fold_constants(analyze(parse_source(sample(name))))
    for info in tm.processes:
        p = lower_process(tm, info)
        if do_compact:
            p = compact(p)
        assert parse_text(emit_text(p)) == p
        assert emit_text(parse_text(emit_text(p))) == emit_text(p)


def test_parse_text_rejects_dangling_label():
    text = emit_text(lowered(sample("ex3"))).replace("jump (i2_for_loop_cond)", "jump (nowhere)")
    with pytest.raises(MCodeSyntaxError):
        parse_text(text)


def test_compaction_removes_standalone_nops():
    raw = lowered(sample("ex2"), "foo", do_compact=False)
    assert any(i.op == "nop" for _, ins in groups(raw.code) for i in ins if len(ins) == 1)
    p = compact(raw)
    for _, ins in groups(p.code):
        assert ins == [] or ins[0].op != "nop"


def _all_programs(seed, alu):
    tm = fold_constants(analyze(parse_source(random_program(seed))))
    return lower_process(tm, "main", parse_alu(alu))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["flat", "shared", "shared2"]))
def test_operand_count_and_labels(seed, alu):
    raw = _all_programs(seed, alu)
    for p in (raw, compact(raw)):
        check_program(p)
        names = set(p.labels()) | {END}
        for i in p.code:
            if i.op == "expr":
                assert len(i.sources()) <= 2
            if i.target is not None:
                assert i.target in names


def test_shared_model_uses_temporaries_not_immediates():
    p = lowered(sample("ex4"), alu="shared")
    kinds = {o.kind for i in p.code for o in i.operands()}
    assert "temp" in kinds and "immed" not in kinds
    for _, ins in groups(p.code):
        assert len([i for i in step_body(ins) if i.op == "expr"]) <= 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_alu_models_and_compaction_agree(seed):
    src = random_program(seed)
    ref, tm = reference_values(src)
    for alu in ("flat", "shared"):
        for do_compact in (False, True):
            p = lower_process(tm, "main", parse_alu(alu))
            if do_compact:
                p = compact(p)
            r = simulate(Compiled(tm, {"main": p}))
            assert r.termination == "all-ended"
            assert agree(ref, local_values(r))


@pytest.mark.parametrize("name", TERMINATING)
def test_corpus_alu_models_agree(name):
    tm = fold_constants(analyze(parse_source(sample(name))))
    finals = []
    for alu in ("flat", "shared"):
        for do_compact in (False, True):
            progs = {}
            for info in tm.processes:
                p = lower_process(tm, info, parse_alu(alu))
                progs[info.name] = compact(p) if do_compact else p
            r = simulate(Compiled(copy.deepcopy(tm), progs))
            finals.append({k: v for k, v in r.stores.items() if "." not in k})
    assert all(f == finals[0] for f in finals)


def test_compaction_shortens_ex2():
    raw = lowered(sample("ex2"), "foo", do_compact=False)
    assert step_count(compact(raw).code) < step_count(raw.code)
