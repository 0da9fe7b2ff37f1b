"""Run the five dining philosophers until the circular wait on the forks is detected."""
from _common import sample

from conpro_hls.pipeline import Options, compile_source
from conpro_hls.sim import load_system, run

c = compile_source(sample("ex11"), "ex11.cp", Options())
for policy in ("static", "fifo"):
    system = load_system(c.tm, c.programs,
                         {"schedulers": {f"fork_{i}": policy for i in range(5)}})
    r = run(system, 100_000)
    print(f"{policy}: {r.termination} at cycle {r.cycles}")
    print(r.deadlock)
