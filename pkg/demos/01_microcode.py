"""Lower the loop samples to microcode and show what compaction and bb scheduling change."""
from _common import sample

from conpro_hls.mcode import emit_text, step_count
from conpro_hls.pipeline import Options, compile_source

for name, proc in (("ex3", "main"), ("ex2", "foo")):
    plain = compile_source(sample(name), f"{name}.cp", Options())
    print(f"== {name}.{proc}: {step_count(plain.programs[proc].code)} steps")
    print(emit_text(plain.programs[proc]))
    fast = compile_source(sample(name), f"{name}.cp", Options(rs=True, bb=True))
    print(f"-- with rs+bb: {step_count(fast.programs[proc].code)} steps\n")
