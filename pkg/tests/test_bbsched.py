import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import TERMINATING, agree, compiled, local_values, reference_values, run_variant, simulate
from progen import random_program
from conpro_hls.bbsched import BasicBlock, build_ddg, ddg_dot, optimize, partition, schedule_block
from conpro_hls.frontend import parse_source
from conpro_hls.mcode import compact, emit_text, lower_process, parse_text, step_count
from conpro_hls.mcode.instr import groups
from conpro_hls.pipeline import Compiled
from conpro_hls.sema import analyze, fold_constants

INDEPENDENT = """process main:
begin
  reg a, b, c, d : int[8];
  a <- 1; b <- 2; c <- 3;
  d <- a + b;
end;"""


def program(src, proc="main"):
    tm = fold_constants(analyze(parse_source(src)), "*")
    return tm, compact(lower_process(tm, proc))


def blocks_of(p):
    return [b for b in partition(p) if isinstance(b, BasicBlock)]


def oracle_levels(block):
    """ASAP levels from an independently built conflict graph."""
    g = nx.DiGraph()
    g.add_nodes_from(range(len(block.nodes)))
    for j, v in enumerate(block.nodes):
        for i in range(j):
            u = block.nodes[i]
            if u.writes & (v.reads | v.writes) or v.writes & u.reads:
                g.add_edge(i, j)
    out = {}
    for k, gen in enumerate(nx.topological_generations(g)):
        for n in gen:
            out[n] = k + 1
    return out


def test_independent_moves_share_a_step():
    _, p = program(INDEPENDENT)
    q = optimize(p)
    assert step_count(q.code) == 2 < step_count(p.code) == 4
    first = groups(q.code)[0][1]
    assert first[0].op == "bind" and first[0].args == (3,)


def test_ddg_dot_text():
    _, p = program(INDEPENDENT)
    dot = ddg_dot(p)
    assert dot.startswith('digraph "main"') and dot.rstrip().endswith("}")
    assert dot.count("->") == 2  # d reads a and b


def test_only_jump_targets_split_blocks():
    _, p = program(INDEPENDENT)
    assert len(blocks_of(p)) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_levels_match_oracle_and_groups_are_independent(seed):
    _, p = program(random_program(seed))
    for b in blocks_of(p):
        build_ddg(b)
        want = oracle_levels(b)
        assert [n.level for n in b.nodes] == [want[k] for k in range(len(b.nodes))]
        for group in schedule_block(b):
            for u in group:
                for v in group:
                    if u is not v:
                        assert not (u.writes & (v.reads | v.writes))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_group_size_bound(seed, c):
    _, p = program(random_program(seed))
    for b in blocks_of(p):
        assert all(len(g) <= c for g in schedule_block(b, c))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([None, 1, 2]))
def test_preserves_semantics_and_never_slower(seed, c):
    src = random_program(seed)
    ref, tm = reference_values(src)
    base = run_variant(tm)
    r = run_variant(tm, bb=True, max_par=c)
    assert r.termination == base.termination == "all-ended"
    assert agree(ref, local_values(r))
    assert r.cycles <= base.cycles


@pytest.mark.parametrize("name", TERMINATING)
def test_corpus_preserved_and_monotone(name):
    a = simulate(compiled(name))
    b = simulate(compiled(name, bb=True))
    assert a.termination == b.termination
    assert {k: v for k, v in a.stores.items() if "$" not in k} == \
        {k: v for k, v in b.stores.items() if "$" not in k}
    assert b.cycles <= a.cycles


def test_strict_improvement_fixture():
    tm, p = program(INDEPENDENT)
    slow = simulate(Compiled(tm, {"main": p}))
    fast = simulate(Compiled(tm, {"main": optimize(p)}))
    assert fast.cycles < slow.cycles
    assert local_values(fast) == local_values(slow)


def test_scheduled_text_roundtrips():
    _, p = program(INDEPENDENT)
    q = optimize(p)
    assert parse_text(emit_text(q)) == q
