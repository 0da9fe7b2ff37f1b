"""Randomized request schedules for the access schedulers of the simulator."""
import random

from conpro_hls.pipeline import Options, compile_source
from conpro_hls.sim import load_system
from conpro_hls.sim.machine import BLOCKED, RUNNING

N_PROCS = 4
ROUNDS = 2
_cache = {}


def contention_source(policy, n=N_PROCS, rounds=ROUNDS):
    lines = [f'reg x : int[8] with scheduler="{policy}";',
             f"array delay: reg[{n * rounds}] of int[8];"]
    for k in range(n):
        lines.append(f"""process p{k}:
begin
  reg d : int[8];
  for r = 0 to {rounds - 1} do
  begin
    d <- 0;
    while d < delay.[{k}*{rounds}+r] do begin d <- d + 1; end;
    x <- {k};
  end;
end;""")
    lines.append("process main:\nbegin\n" + "".join(f"  p{k}.start();\n" for k in range(n)) + "end;")
    return "\n".join(lines) + "\n"


def contention_program(policy):
    if policy not in _cache:
        _cache[policy] = compile_source(contention_source(policy), "contention.cp",
                                        Options(fold=False))
    return _cache[policy]


def _requesters(system, obj):
    out = []
    for p in system.procs:
        if p.status in (RUNNING, BLOCKED) and p.waiting is None and p.pc < len(p.steps) \
                and not p.granted and any(g[0] == obj for g in p.steps[p.pc].guards):
            out.append(p)
    return out


def scheduler_trial(policy, delays, limit=2000):
    """Run one schedule; returns (problems, grants) where grants lists (cycle, process)."""
    c = contention_program(policy)
    s = load_system(c.tm, c.programs, {"trace": True})
    s.glob["delay"] = list(delays)
    problems, grants = [], []
    while s.cycle < limit and not s.done():
        t = s.cycle
        req = _requesters(s, "x")
        arrival = {p.name: (t if p.req_since is None else p.req_since) for p in req}
        k = len(s.trace)
        s.step_cycle()
        got = [e.process for e in s.trace[k:] if e.kind == "grant" and "x" in e.detail.split(",")]
        if len(got) > 1:
            problems.append(f"cycle {t}: {len(got)} grants of x")
        if not got:
            continue
        grants.append((t, got[0]))
        if policy == "static":
            want = min(req, key=lambda p: p.index).name
        else:
            want = min(req, key=lambda p: (arrival[p.name], p.index)).name
        if got[0] != want:
            problems.append(f"cycle {t}: granted {got[0]}, expected {want} "
                            f"(requesters {sorted(arrival.items())})")
    if not s.done():
        problems.append("requests left unserved (starvation)")
    served = {}
    for _, p in grants:
        served[p] = served.get(p, 0) + 1
    if served != {f"p{k}": ROUNDS for k in range(N_PROCS)}:
        problems.append(f"grant counts {served}")
    return problems, grants


def sweep(policy, trials, seed=0, max_delay=4):
    rng = random.Random(seed)
    failures = []
    for _ in range(trials):
        delays = [rng.randint(0, max_delay) for _ in range(N_PROCS * ROUNDS)]
        problems, _ = scheduler_trial(policy, delays)
        if problems:
            failures.append((delays, problems))
    return failures
