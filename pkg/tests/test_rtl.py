import os
import re

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, HERE, compiled
from progen import random_program
from conpro_hls.mcode import step_count
from conpro_hls.pipeline import Options, compile_source
from conpro_hls.rtl import (Branch, Next, RtlError, build_fsms, build_schedulers, compile_design,
                            validate_design, validate_text)
from conpro_hls.rtl.statelist import state_names
from conpro_hls.rtl.naming import sel_width
from conpro_hls.rtl.support import SUPPORT_PACKAGE

GOLDEN = os.path.join(HERE, "golden", "ex5")
OPTS = [{}, {"bb": True}, {"rs": True, "bb": True}, {"alu": "shared"}]


def enum_members(text):
    body = re.search(r"type pro_states is \((.*?)\);", text, re.S).group(1)
    return [m.split("--")[0].strip().rstrip(",") for m in body.splitlines()
            if m.split("--")[0].strip()]


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("opts", OPTS, ids=lambda o: "+".join(o) or "plain")
def test_state_count_law_and_validator(name, opts):
    c = compiled(name, **opts)
    fsms = build_fsms(c.programs, c.tm, name)
    design = compile_design(c, name)
    validate_design(design)
    for pname, prog in c.programs.items():
        members = enum_members(design.files[f"{name}_{pname}.vhdl"])
        assert len(fsms[pname].states) == len(members) == step_count(prog.code) + 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_state_count_law_random(seed, bb):
    c = compile_source(random_program(seed), "r.cp", Options(bb=bb))
    design = compile_design(c, "r")
    assert validate_design(design)
    prog = c.programs["main"]
    assert len(enum_members(design.files["r_main.vhdl"])) == step_count(prog.code) + 2


def test_ex5_entities_and_split(ex5_design):
    files = ex5_design.entity_files
    assert files == ["ex5_FUN_f.vhdl", "ex5_consumer1.vhdl", "ex5_consumer2.vhdl",
                     "ex5_main.vhdl", "ex5.vhdl"]
    for f in files[:-1]:
        text = ex5_design.files[f]
        for proc in ("state_transition", "control_path", "data_path", "data_trans"):
            assert re.search(rf"^\s*{proc}: process", text, re.M), (f, proc)
    assert "entity MOD_ex5 is" in ex5_design.top
    assert ex5_design.manifest.splitlines()[1:] == ["conpro_support.vhdl"] + files


def test_ex5_consumer1_listing(ex5_design):
    text = ex5_design.files["ex5_consumer1.vhdl"]
    members = enum_members(text)
    assert len(members) == 12
    assert members[0] == "S_consumer1_start" and members[-1] == "S_consumer1_end"
    assert "S_i2_for_loop_incr" in members
    for port in ("SEMA_sem_DOWN: out std_logic", "SEMA_sem_GD: in std_logic",
                 "PRO_FUN_f_CALL: out std_logic", "PRO_FUN_f_GD: in std_logic",
                 "REG_ARG_FUN_f_x_WR: out signed(15 downto 0)",
                 "ARRAY_data_out_SEL: out std_logic_vector(7 downto 0)",
                 "PRO_consumer1_ENABLE: in std_logic", "PRO_consumer1_END: out std_logic",
                 "conpro_system_clk: in std_logic", "conpro_system_reset: in std_logic"):
        assert port in text, port
    assert "SEMA_sem_DOWN <= not((SEMA_sem_GD) = ('0'))" not in text
    assert "when S_i2_for_loop_incr =>" in text


def test_ex5_golden(ex5_design):
    if os.environ.get("HLS_UPDATE_GOLDEN"):
        ex5_design.write(GOLDEN)
    for name, text in ex5_design.files.items():
        with open(os.path.join(GOLDEN, name)) as f:
            assert f.read() == text, name
    with open(os.path.join(GOLDEN, "ex5.manifest")) as f:
        assert f.read() == ex5_design.manifest


def test_emission_is_deterministic():
    a = compile_design(compiled("ex11"))
    b = compile_design(compiled("ex11"))
    assert a.files == b.files


def _cascade(top, spec):
    m = re.search(rf"\n  (\w*{spec.obj})_SCHED: process.*?end process", top, re.S)
    order = []
    alts = "|".join(sorted(spec.accessors, key=len, reverse=True))
    for line in m.group(0).splitlines():
        hit = re.match(rf"\s*(?:if|elsif) {m.group(1)}_({alts})_\w+ = '1'", line)
        if hit and hit.group(1) not in order:
            order.append(hit.group(1))
    return order


@pytest.mark.parametrize("name", ["ex5", "ex11", "ex9", "ex2"])
def test_static_cascade_follows_accessor_order(name):
    c = compiled(name)
    static = {s.obj: "static" for s in build_schedulers(c.tm)}
    design = compile_design(c, overrides=static)
    specs = [s for s in build_schedulers(c.tm, static) if s.kind != "process" and len(s.accessors) > 1]
    for s in specs:
        assert _cascade(design.top, s) == s.accessors, s.obj


def test_fifo_policy_uses_queue():
    design = compile_design(compiled("ex11"))
    sched = re.search(r"SEMA_fork_0_SCHED: process.*?end process", design.top, re.S).group(0)
    assert "conpro_enqueue" in sched and "conpro_dequeue" in sched


def test_read_only_objects_get_no_scheduler():
    c = compiled("ex5")
    objs = {s.obj for s in build_schedulers(c.tm)}
    assert "data_out" in objs and "mon" in objs
    assert "data_in" in objs  # written by main
    assert not any(o.startswith("ARG_") or o.startswith("RET_") for o in objs)


def test_guarded_state_waits_in_place():
    c = compiled("ex5")
    fsm = build_fsms(c.programs, c.tm, "ex5")["consumer1"]
    st = next(s for s in fsm.states if s.name == "S_i1_fun")
    assert isinstance(st.next, Branch) and st.next.on_true == Next("S_i1_fun")
    assert st.guarded


def test_state_names_unique_or_error():
    c = compiled("ex3")
    names, labels, start, end = state_names(c.programs["main"])
    assert start == "S_main_start" and end == "S_main_end"
    assert labels["i2_for_loop_end"] == end
    prog = c.programs["main"]
    from conpro_hls.mcode.instr import Instr
    prog.code.insert(0, Instr("label", ("i1_assign",)))
    prog.code.insert(1, Instr("move", prog.code[2].args))
    with pytest.raises(RtlError):
        state_names(prog)


@pytest.mark.parametrize("size,width", [(2, 8), (100, 8), (256, 8), (257, 16), (70000, 24)])
def test_selector_width(size, width):
    assert sel_width(size) == width


GOOD = """library IEEE;
use IEEE.std_logic_1164.all;
entity e is
  port(a: in std_logic; b: out std_logic);
end e;
architecture main of e is
  signal s: std_logic;
begin
  p: process(a)
  begin
    if a = '1' then
      b <- s;
    end if;
  end process p;
end main;
""".replace("b <- s", "b <= s")


def test_validator_accepts_small_entity():
    assert validate_text(GOOD) == []


@pytest.mark.parametrize("mutation,problem", [
    (("  signal s: std_logic;", "  signal s: std_logic;\n  signal s: std_logic;"), "declared 2 times"),
    (("b <= s", "b <= t"), "undeclared identifier t"),
    (("    end if;\n", ""), "closes"),
])
def test_validator_rejects(mutation, problem):
    bad = GOOD.replace(*mutation)
    assert any(problem in p for p in validate_text(bad))


def test_validator_checks_all_three_cases(ex5_design):
    text = ex5_design.files["ex5_consumer1.vhdl"]
    bad = text.replace("      when S_i2_for_loop_incr =>", "      when others =>", 1)
    assert any("misses states" in p for p in validate_text(bad))


def test_support_package_validates():
    assert validate_text(SUPPORT_PACKAGE) == []


def test_listing_names_every_state():
    c = compiled("ex5")
    fsm = build_fsms(c.programs, c.tm, "ex5")["consumer1"]
    listing = fsm.listing()
    assert all(f"{s.name}:" in listing for s in fsm.states)
