import pytest
from hypothesis import given, settings, strategies as st

from conftest import agree, compiled, local_values, reference_values, run_variant, sample, simulate
from simlab import scheduler_trial, sweep
from conpro_hls.pipeline import Options, compile_source
from conpro_hls.sim import load_system, run, step_cycle, write_trace
from conpro_hls.sim.machine import BLOCKED, TRACE_KINDS
from conpro_hls.sim.objects import Fifo, Semaphore

FAST = settings(max_examples=25, deadline=None)


def build(src, **opts):
    return compile_source(src, "t.cp", Options(observe="*", **opts))


def traced(c, cycles=5000, **cfg):
    return run(load_system(c.tm, c.programs, {"trace": True, **cfg}), cycles)


def events(r, kind, proc=None):
    return [e for e in r.trace if e.kind == kind and (proc is None or e.process == proc)]


def delay(k):
    return f"wait for {k};" if k else ""


# ---------------------------------------------------------------- basics

def test_deterministic_traces():
    a = traced(compiled("ex11"), 500)
    b = traced(compiled("ex11"), 500)
    assert [e.line() for e in a.trace] == [e.line() for e in b.trace]


def test_trace_file_format(tmp_path):
    r = traced(compiled("ex9"), 5000, random={"rnd": [1, 2, 3]})
    path = tmp_path / "t.tsv"
    write_trace(r.trace, path)
    for line in path.read_text().splitlines():
        cycle, proc, kind, detail = line.split("\t")
        assert int(cycle) >= 0 and proc and kind in TRACE_KINDS


def test_only_main_starts():
    c = compiled("ex5")
    s = load_system(c.tm, c.programs, {"trace": True})
    step_cycle(s)
    assert [e.process for e in s.trace if e.kind == "start"] == ["main"]


def test_cycle_limit_must_be_positive():
    c = compiled("ex3")
    with pytest.raises(ValueError):
        run(load_system(c.tm, c.programs), 0)


@pytest.mark.parametrize("name", ["ex3", "ex4"])
def test_oracle_agreement_corpus(name):
    ref, tm = reference_values(sample(name))
    r = run_variant(tm)
    assert r.termination == "all-ended" and agree(ref, local_values(r))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**7))
def test_oracle_agreement_random(seed):
    from progen import random_program
    ref, tm = reference_values(random_program(seed))
    r = run_variant(tm)
    assert r.termination == "all-ended" and agree(ref, local_values(r))


# ---------------------------------------------------------------- timing

@FAST
@given(st.lists(st.booleans(), min_size=1, max_size=8))
def test_guarded_access_costs_two_cycles(pattern):
    """Each write of the shared register takes 2 cycles when uncontended, a local write 1."""
    body = "".join("  x <- 1;\n" if g else "  a <- 1;\n" for g in pattern)
    src = f"reg x : int[8];\nprocess main:\nbegin\n  reg a : int[8];\n{body}end;\n"
    base = simulate(build("process main:\nbegin\n  reg a : int[8];\n  a <- 1;\nend;\n"))
    r = simulate(build(src))
    guarded = sum(pattern)
    assert r.cycles - base.cycles == 2 * guarded + (len(pattern) - guarded) - 1


def test_bound_block_swaps_in_one_cycle():
    src = """process main:
begin
  reg a, b : int[8];
  a <- 1; b <- 2;
  a <- b, b <- a;
end;"""
    seq = src.replace("a <- b, b <- a;", "a <- b; b <- a;")
    r1 = simulate(build(src))
    r2 = simulate(build(src, bind_source="none"))
    assert (r1.value("a", "main"), r1.value("b", "main")) == (2, 1)
    assert (r2.value("a", "main"), r2.value("b", "main")) == (2, 2)
    assert r2.cycles - r1.cycles == 1
    assert simulate(build(seq)).value("b", "main") == 2


# ---------------------------------------------------------------- schedulers

@pytest.mark.parametrize("policy", ["static", "fifo"])
def test_scheduler_sweep(policy):
    assert sweep(policy, 400, seed=7) == []


@FAST
@given(st.sampled_from(["static", "fifo"]), st.lists(st.integers(0, 6), min_size=8, max_size=8))
def test_scheduler_property(policy, delays):
    problems, grants = scheduler_trial(policy, delays)
    assert problems == []
    cycles = [t for t, _ in grants]
    assert len(cycles) == len(set(cycles))  # at most one grant per cycle


HOG_WRITES = 30
HOG = """reg x : int[8] with scheduler="{policy}";
process hog:
begin
""" + "".join(f"  x <- {k % 7};\n" for k in range(HOG_WRITES)) + """end;
process late:
begin
  wait for 3;
  x <- 1;
end;
process main:
begin
  hog.start(); late.start();
end;"""


def test_static_priority_starves_later_requester():
    """The earlier-declared process re-requests back to back and keeps winning."""
    r = traced(build(HOG.format(policy="static")))
    hog = [e.cycle for e in events(r, "grant", "hog")]
    late = [e.cycle for e in events(r, "grant", "late")]
    assert len(hog) == HOG_WRITES and late[0] > hog[-1]


def test_fifo_serves_later_requester_in_turn():
    r = traced(build(HOG.format(policy="fifo")))
    hog = [e.cycle for e in events(r, "grant", "hog")]
    late = [e.cycle for e in events(r, "grant", "late")]
    assert late[0] < hog[3]


# ---------------------------------------------------------------- IPC laws

def queue_source(depth, values, wdelays, rdelays):
    n = len(values)
    writes = "".join(f"  {delay(d)}\n  q <- {v};\n" for v, d in zip(values, wdelays))
    reads = "".join(f"  {delay(d)}\n  v <- q;\n  out.[{i}] <- v;\n" for i, d in enumerate(rdelays))
    return f"""open Process;
queue q : int[8] with depth={depth};
array out: reg[{n}] of int[8];
process prod:
begin
{writes}end;
process cons:
begin
  reg v : int[8];
{reads}end;
process main:
begin
  prod.start(); cons.start();
end;"""


@FAST
@given(st.integers(1, 4), st.data())
def test_queue_law(depth, data):
    n = data.draw(st.integers(1, 7))
    values = data.draw(st.lists(st.integers(-128, 127), min_size=n, max_size=n))
    wd = data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    rd = data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    c = build(queue_source(depth, values, wd, rd))
    s = load_system(c.tm, c.programs, {"trace": True})
    q = s.objects["q"]
    assert isinstance(q, Fifo)
    while not s.done() and s.cycle < 5000:
        before = len(q.items)
        requests = {p.name: p.steps[p.pc].guards for p in s.procs
                    if p.status in ("running", BLOCKED) and p.waiting is None
                    and p.pc < len(p.steps) and not p.granted}
        step_cycle(s)
        assert 0 <= len(q.items) <= depth
        for p in s.procs:
            for _, obj, op in requests.get(p.name, []):
                if obj != "q":
                    continue
                blocked = p.blocked_on == ("q", op)
                assert blocked == (before == depth if op == "write" else before == 0)
    assert s.done()
    assert s.glob["out"] == values


def channel_source(values, wdelays, rdelays):
    writes = "".join(f"  {delay(d)}\n  ch <- {v};\n" for v, d in zip(values, wdelays))
    reads = "".join(f"  {delay(d)}\n  v <- ch;\n  out.[{i}] <- v;\n" for i, d in enumerate(rdelays))
    return f"""open Process;
channel ch : int[8] with model="unbuffered";
array out: reg[{len(values)}] of int[8];
process w:
begin
{writes}end;
process r:
begin
  reg v : int[8];
{reads}end;
process main:
begin
  w.start(); r.start();
end;"""


@FAST
@given(st.data())
def test_channel_rendezvous(data):
    n = data.draw(st.integers(1, 5))
    values = data.draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    wd = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    rd = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
    r = traced(build(channel_source(values, wd, rd)))
    assert r.termination == "all-ended"
    assert r.stores["out"] == values
    wg = [e.cycle for e in events(r, "grant", "w") if e.detail == "ch"]
    rg = [e.cycle for e in events(r, "grant", "r") if e.detail == "ch"]
    assert wg == rg and len(wg) == n


@FAST
@given(st.lists(st.integers(0, 6), min_size=2, max_size=4))
def test_barrier_releases_all_at_once(delays):
    n = len(delays)
    procs = "".join(f"process b{k}:\nbegin\n  {delay(d)}\n  bar.await();\nend;\n"
                    for k, d in enumerate(delays))
    src = (f"open Process; open Barrier;\nobject bar : barrier with N={n};\n{procs}"
           "process main:\nbegin\n" + "".join(f"  b{k}.start();\n" for k in range(n)) + "end;")
    r = traced(build(src))
    assert r.termination == "all-ended"
    ups = [e for e in r.trace if e.kind == "unblock" and e.detail == "bar await"]
    blocks = [e for e in r.trace if e.kind == "block" and e.detail == "bar await"]
    assert len({e.cycle for e in ups}) == 1
    assert len(ups) == len(blocks) == n - 1 or len(ups) == n
    assert ups[0].cycle >= max(e.cycle for e in blocks) if blocks else True


def event_source(latch, wake_delay, await_delay):
    flag = " with latch=true" if latch else ""
    return f"""open Process; open Event;
object e : event{flag};
reg done : int[8];
process waiter:
begin
  {delay(await_delay)}
  e.await();
  done <- 1;
end;
process main:
begin
  waiter.start();
  {delay(wake_delay)}
  e.wakeup();
end;"""


@FAST
@given(st.integers(0, 3), st.integers(8, 12))
def test_event_wakeup_before_await(wake, wait_gap):
    """A wakeup nobody waits for is lost unless the event latches it."""
    lost = traced(build(event_source(False, wake, wake + wait_gap)))
    kept = traced(build(event_source(True, wake, wake + wait_gap)))
    assert lost.termination == "deadlock"
    assert lost.deadlock.entries == [("waiter", "e", "event await")]
    assert kept.termination == "all-ended" and kept.stores["done"] == 1


@FAST
@given(st.booleans(), st.integers(0, 3), st.integers(8, 12))
def test_event_await_before_wakeup(latch, wait, gap):
    r = traced(build(event_source(latch, wait + gap, wait)))
    assert r.termination == "all-ended" and r.stores["done"] == 1


@FAST
@given(st.integers(0, 3), st.integers(1, 4),
       st.lists(st.lists(st.sampled_from(["up", "down"]), min_size=1, max_size=5),
                min_size=1, max_size=3))
def test_semaphore_count_bounds(init, depth, scripts):
    init = min(init, depth)
    procs = "".join(f"process s{k}:\nbegin\n" + "".join(f"  sem.{op}();\n" for op in ops) + "end;\n"
                    for k, ops in enumerate(scripts))
    src = (f"open Process; open Semaphore;\n"
           f"object sem : semaphore with init={init} and depth={depth};\n{procs}"
           "process main:\nbegin\n" + "".join(f"  s{k}.start();\n" for k in range(len(scripts)))
           + "end;")
    c = build(src)
    s = load_system(c.tm, c.programs, {"trace": False})
    sem = s.objects["sem"]
    assert isinstance(sem, Semaphore) and sem.count == init
    for _ in range(300):
        step_cycle(s)
        assert 0 <= sem.count <= depth
        if s.done() or s.detect_deadlock():
            break
    ups = sum(ops.count("up") for ops in scripts)
    downs = sum(ops.count("down") for ops in scripts)
    if s.done():
        assert sem.count == init + ups - downs


# ---------------------------------------------------------------- calls and exceptions

def test_call_blocks_until_callee_ends():
    r = traced(compiled("ex2"), 20000)
    end_foo = events(r, "end", "foo")[0].cycle
    resume = [e for e in events(r, "unblock", "main") if e.detail == "foo call"]
    assert resume and resume[0].cycle >= end_foo
    assert r.termination == "all-ended"


def test_shared_function_results():
    r = traced(compiled("ex5"), 50_000)
    out = r.stores["data_out"]
    assert out[:51] == [((i * i + 2**15) % 2**16) - 2**15 for i in range(51)]


def test_exception_propagates_from_function():
    r = traced(compiled("ex9"), 20000, random={"rnd": [5, 3, 0, 7]})
    assert r.termination == "all-ended" and r.value("d", "main") == 0
    raised = events(r, "raise")
    caught = events(r, "catch")
    assert raised and raised[0].process == "FUN_foo"
    assert caught and caught[0].process == "main" and caught[0].cycle >= raised[0].cycle


def test_no_exception_without_zero():
    r = traced(compiled("ex9"), 50000, random={"rnd": [2]})
    assert not events(r, "raise")


def test_dining_philosophers_deadlock():
    for policy in ("static", "fifo"):
        scheds = {f"fork_{i}": policy for i in range(5)}
        r = traced(compiled("ex11"), 100_000, schedulers=scheds)
        assert r.termination == "deadlock"
        blocked = {p: (o, op) for p, o, op in r.deadlock.entries}
        assert {p: blocked[p] for p in blocked if p.startswith("phil")} == {
            f"philosopher_{i}": (f"fork_{(i + 1) % 5 if i < 4 else 0}", "semaphore down")
            for i in range(5)}
        assert not any(e.kind == "write" and "eating" in e.detail and e.detail.endswith("=1")
                       for e in r.trace)
