"""Emit and validate the VHDL of the producer/consumer sample into ./ex5_vhdl."""
import sys

from _common import sample

from conpro_hls.pipeline import Options, compile_source
from conpro_hls.rtl import compile_design, validate_design

out = sys.argv[1] if len(sys.argv) > 1 else "ex5_vhdl"
design = compile_design(compile_source(sample("ex5"), "ex5.cp", Options()), module="ex5")
validate_design(design)
design.write(out)
for name in sorted(design.files):
    print(f"{out}/{name}: {design.files[name].count(chr(10))} lines")
