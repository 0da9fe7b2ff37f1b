"""Merge chains of register assignments and compare against the AST interpreter."""
from _common import sample

from conpro_hls.frontend import parse_source, print_stmts
from conpro_hls.rsopt import optimize_process, tracked_registers
from conpro_hls.sema import analyze
from conpro_hls.sim import interpret_ast

# drop the constant inputs so the merged expressions stay symbolic
src = sample("ex4").replace("  a <- 1; b <- 2; c <- 3;\n", "")
tm = analyze(parse_source(src))
p = tm.process("main")
print("source:\n" + print_stmts(p.body))
for live in ({"x", "y"}, {"x"}):
    out = optimize_process(p.body, tracked_registers(tm, p), live)
    print(f"live out {sorted(live)}:\n" + print_stmts(out))
    env = {"a": 1, "b": 2, "c": 3}
    before = interpret_ast(p.body, tm=tm, proc="main", store=dict(env))
    after = interpret_ast(out, tm=tm, proc="main", store=dict(env))
    print("  agrees on live registers:", all(before[k] == after[k] for k in live), "\n")
