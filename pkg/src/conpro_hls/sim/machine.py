"""Cycle-level simulation of a set of microcode programs sharing objects.

Each cycle has three phases. Phase A: every running process evaluates its current
step against the state at the start of the cycle and posts requests for guarded
objects. Phase B: arbiters grant requests (one process per object and cycle).
Phase C: writes, object operations, process starts and stops, and state changes
take effect together.

A step that needs a guarded object costs at least two cycles: the request is
granted in one cycle and the step executes in the next.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..mcode.instr import END, MProgram, expr_result_type, groups, step_body
from ..sema.types import BOOL, LOGIC, T, binop, convert, unop, wrap
from .interp import RandomSource, random_sources
from .objects import Arbiter, Barrier, Event, Fifo, Mutex, Rendezvous, Semaphore, Timer

IDLE, RUNNING, BLOCKED, ENDED = "idle", "running", "blocked", "ended"
TRACE_KINDS = ("state-enter", "block", "unblock", "grant", "write", "read", "raise", "catch",
               "start", "stop", "end", "deadlock")


class SimLoadError(Exception):
    pass


@dataclass
class TraceEvent:
    cycle: int
    process: str
    kind: str
    detail: str = ""

    def line(self):
        return f"{self.cycle}\t{self.process}\t{self.kind}\t{self.detail}"


@dataclass
class Step:
    name: str  # state name
    instrs: list
    guards: list  # [(resource, object, operation)]
    wchan: bool = False  # writes an unbuffered channel


@dataclass
class Proc:
    name: str
    index: int
    program: MProgram
    steps: list
    labels: dict
    local: dict = field(default_factory=dict)
    status: str = IDLE
    pc: int = 0
    granted: bool = False
    waiting: tuple | None = None  # (object, operation) while blocked inside a method
    blocked_on: tuple | None = None  # (object, operation) while a request is unavailable
    req_since: int | None = None
    starts: int = 0


@dataclass
class DeadlockReport:
    cycle: int
    entries: list  # (process, object, operation)

    def __str__(self):
        return "\n".join(f"{p}: blocked on {o} {op}" for p, o, op in self.entries)


@dataclass
class RunResult:
    stores: dict  # global store plus process-local stores as "proc.name"
    cycles: int
    termination: str  # all-ended | deadlock | cycle-limit
    trace: list
    deadlock: DeadlockReport | None = None

    def value(self, name, proc=None):
        return self.stores[f"{proc}.{name}" if proc else name]


class SimSystem:
    def __init__(self, tm, programs, config=None):
        config = config or {}
        self.tm = tm
        self.cycle = 0
        self.trace = []
        self.tracing = config.get("trace", True)
        self.overrides = config.get("schedulers", {})
        self.glob = {}
        self.kinds = {}  # global object name -> storage kind
        self.roles = {}
        self.objects = {}
        self.arbiters = {}
        self.randoms = random_sources(tm, config.get("random"))
        self.held = {}  # resource -> process executing with it this cycle
        self.procs = []
        self.by_name = {}
        self._init_objects()
        for k, info in enumerate(tm.processes):
            prog = programs.get(info.name)
            if prog is None:
                raise SimLoadError(f"no program for process '{info.name}'")
            p = self._load(info, prog, k)
            self.procs.append(p)
            self.by_name[p.name] = p
        # unbuffered channel writers run first so readers see the transfer
        self.order = list(self.procs)
        main = self.by_name.get("main")
        if main is None:
            raise SimLoadError("no process named 'main'")
        self._start(main)

    # ------------------------------------------------------------------ loading

    def _init_objects(self):
        tm = self.tm
        for name, s in tm.symbols.items():
            k = s.kind
            if k in ("reg", "var", "sig"):
                self.glob[name] = 0
                self.kinds[name] = k
                self.roles[name] = s.role
            elif k == "array":
                self.glob[name] = [0] * s.size
                self.kinds[name] = "array:" + (s.elem_kind or "reg")
            elif k == "semaphore":
                self.objects[name] = Semaphore(s.params.get("init", 0), s.params.get("depth", 8))
            elif k == "mutex":
                self.objects[name] = Mutex()
            elif k == "event":
                self.objects[name] = Event(bool(s.params.get("latch", False)))
            elif k == "barrier":
                self.objects[name] = Barrier(max(1, s.params.get("N", 1)))
            elif k == "timer":
                self.objects[name] = Timer(s.params.get("interval", 0), s.params.get("mode", 0))
            elif k == "queue":
                self.objects[name] = Fifo(s.params.get("depth", 8))
            elif k == "channel":
                if s.params.get("model", "buffered") == "unbuffered":
                    self.objects[name] = Rendezvous()
                else:
                    self.objects[name] = Fifo(1)
        for call in tm.config:
            o = self.objects.get(call.obj.id)
            if isinstance(o, Timer) and call.method == "time" and call.args:
                o.interval = call.args[0]
            elif isinstance(o, Semaphore) and call.method == "init" and call.args:
                o.count = call.args[0]
        for name, s in tm.symbols.items():
            pol = self.overrides.get(name) or s.params.get("scheduler") or s.params.get("schedule")
            self.arbiters[name] = Arbiter("fifo" if pol == "fifo" else "static")

    def _load(self, info, prog, k):
        local = {}
        for d in prog.data:
            if d.kind == "array":
                local[d.name] = [0] * d.size
            else:
                local[d.name] = 0
        for d in prog.imports:
            if d.kind in ("register", "variable", "signal", "array", "queue", "channel"):
                if d.name not in self.glob and d.name not in self.objects:
                    raise SimLoadError(f"process '{info.name}' imports unknown object '{d.name}'")
        steps, labels = [], {}
        prev, sub = info.name, 0
        gs = groups(prog.code)
        for i, (lbs, instrs) in enumerate(gs):
            for lb in lbs:
                labels[lb] = i
            if not instrs:
                continue
            if lbs:
                prev, sub = lbs[-1], 0
                name = prev
            else:
                sub += 1
                name = f"{prev}_{sub}"
            body = step_body(instrs)
            guards = self._guards(info, local, body)
            wchan = any(isinstance(self.objects.get(r[1]), Rendezvous) and r[2] == "write"
                        for r in guards)
            steps.append(Step(name, body, guards, wchan))
        # labels index into groups; re-map onto steps (trailing labels mean end)
        idx, remap = 0, {}
        for i, (lbs, instrs) in enumerate(gs):
            remap[i] = idx
            if instrs:
                idx += 1
        labels = {lb: remap[i] for lb, i in labels.items()}
        labels[END] = len(steps)
        return Proc(info.name, k, prog, steps, labels, local)

    def _guards(self, info, local, body):
        out = []

        def add(res, obj, op):
            if (res, obj, op) not in out:
                out.append((res, obj, op))

        for ins in body:
            if ins.op == "fun":
                o = ins.args[0].name
                add(o, o, ins.args[1])
                continue
            for pos, op in enumerate(ins.operands()):
                self._guard_operand(info, local, op, pos == 0 and ins.op in ("move", "expr"), add)
        return out

    def _guard_operand(self, info, local, op, is_dst, add):
        while op is not None:
            if op.kind == "obj":
                name = op.name
                sym = self.tm.lookup(name, info)
                if sym is not None and sym.in_ram:
                    add(f"RAM:{sym.block}", name, "write" if is_dst else "read")
                elif name in local:
                    pass
                elif isinstance(self.objects.get(name), (Fifo, Rendezvous)):
                    add(name, name, "write" if is_dst else "read")
                elif is_dst and name in self.glob and self.roles.get(name) not in (
                        "arg", "ret", "exc"):
                    add(name, name, "write")
            op = op.index
            is_dst = False

    # ---------------------------------------------------------------- helpers

    def emit(self, proc, kind, detail=""):
        if self.tracing:
            self.trace.append(TraceEvent(self.cycle, proc, kind, detail))

    def _start(self, p):
        p.status = RUNNING
        p.pc = 0
        p.granted = False
        p.waiting = None
        p.blocked_on = None
        p.req_since = None
        p.starts += 1
        self.emit(p.name, "start")
        self._enter(p)
        if p.pc >= len(p.steps):
            self._end(p)

    def _enter(self, p):
        if p.pc < len(p.steps):
            self.emit(p.name, "state-enter", p.steps[p.pc].name)

    def _end(self, p):
        p.status = ENDED
        self.emit(p.name, "end")

    def policy(self, obj):
        a = self.arbiters.get(obj)
        return a.policy if a else "static"

    # -------------------------------------------------------------- operands

    def read(self, p, op, imm, effects):
        k = op.kind
        if k == "const":
            v = op.value
            src = op.ty
        elif k in ("immed", "alu"):
            v = imm.get(op.value, 0)
            src = op.ty
        elif k == "temp":
            v = p.local.get(op.key, 0)
            src = op.ty
        else:
            name = op.name
            src = op.ty
            obj = self.objects.get(name)
            if obj is not None:
                v = self._channel_read(p, name, obj, effects)
            else:
                store = p.local if name in p.local else self.glob
                cell = store[name]
                if op.index is not None:
                    i = self.read(p, op.index, imm, effects)
                    v = cell[i] if 0 <= i < len(cell) else 0
                else:
                    v = cell
        if op.conv is not None and src is not None:
            v = convert(v, src, op.conv)
        return v

    def _channel_read(self, p, name, obj, effects):
        if isinstance(obj, Fifo):
            effects.append(("pop", name, p.name))
            v = obj.items[0] if obj.items else 0
        else:
            v = obj.transfer if obj.transfer is not None else 0
            effects.append(("taken", name, p.name))
        self.emit(p.name, "read", f"{name}={v}")
        return v

    def write(self, p, op, value, imm, writes, effects):
        k = op.kind
        if k in ("immed", "alu"):
            imm[op.value] = value
            return
        if k == "temp":
            writes.append((p.local, op.key, None, value))
            return
        name = op.name
        obj = self.objects.get(name)
        if isinstance(obj, Fifo):
            effects.append(("push", name, value))
            self.emit(p.name, "write", f"{name}={value}")
            return
        if isinstance(obj, Rendezvous):
            obj.transfer = value
            effects.append(("sent", name, p.name))
            self.emit(p.name, "write", f"{name}={value}")
            return
        local = name in p.local
        store = p.local if local else self.glob
        idx = None
        if op.index is not None:
            idx = self.read(p, op.index, imm, effects)
        writes.append((store, name, idx, value))
        if not local:
            self.emit(p.name, "write", f"{name}{'' if idx is None else f'[{idx}]'}={value}")
        sym = self.tm.lookup(name, p.name)
        if sym is not None and sym.role == "exc":
            if value:
                self.emit(p.name, "raise", f"{name}={value}")
            elif store[name]:
                self.emit(p.name, "catch", name)

    # -------------------------------------------------------------- execution

    def execute(self, p, step, writes, effects):
        """Run one step's instructions; returns the next pc, or None to stay (blocked)."""
        imm = {}
        nxt = p.pc + 1
        for ins in step.instrs:
            op = ins.op
            if op == "move":
                d, s = ins.args
                v = self.read(p, s, imm, effects)
                self.write(p, d, convert(v, s.eff, d.ty), imm, writes, effects)
            elif op == "expr":
                if len(ins.args) == 4:
                    d, a, o, b = ins.args
                    va = self.read(p, a, imm, effects)
                    vb = self.read(p, b, imm, effects)
                    v = binop(o, va, vb, a.eff, b.eff)
                    rty = expr_result_type(o, a, b)
                else:
                    d, o, a = ins.args
                    va = self.read(p, a, imm, effects)
                    v = unop(o, va, a.eff)
                    rty = expr_result_type(o, a)
                self.write(p, d, convert(v, rty, d.ty), imm, writes, effects)
            elif op == "jump":
                nxt = p.labels[ins.args[0]]
            elif op == "falsejump":
                if not self.read(p, ins.args[0], imm, effects):
                    nxt = p.labels[ins.args[1]]
            elif op == "fun":
                if self.method(p, ins, imm, writes, effects):
                    nxt = None
            # nop and special have no effect
        return nxt

    def method(self, p, ins, imm, writes, effects):
        """Perform a method call; True when the caller must wait for a wake-up."""
        name, m = ins.args[0].name, ins.args[1]
        args = ins.args[2:]
        obj = self.objects.get(name)
        target = self.by_name.get(name)
        if target is not None:
            effects.append((m, name, p.name))
            if m == "call":
                p.waiting = (name, "call")
                return True
            return False
        if name in self.randoms:
            src = self.randoms[name]
            if m == "read":
                d = args[0]
                v = convert(src.next(), T(LOGIC, src.width), d.ty)
                self.write(p, d, v, imm, writes, effects)
            elif m == "seed" and args:
                src.seed(args[0].value)
            return False
        if isinstance(obj, (Event, Barrier, Timer)) and m == "await":
            effects.append(("await", name, p.name))
            p.waiting = (name, "await")
            return True
        vals = [a.value for a in args if a.is_const]
        effects.append((m, name, p.name, vals))
        return False

    def available(self, p, obj_name, op):
        obj = self.objects.get(obj_name)
        if isinstance(obj, Semaphore):
            return obj.available(op)
        if isinstance(obj, Mutex):
            return obj.available(op)
        if isinstance(obj, Fifo):
            return obj.available(op)
        if isinstance(obj, Rendezvous):
            want = "read" if op == "write" else "write"
            return any(q is not p and q.status in (RUNNING, BLOCKED) and q.waiting is None and
                       q.pc < len(q.steps) and
                       any(g[1] == obj_name and g[2] == want for g in q.steps[q.pc].guards)
                       for q in self.procs)
        return True

    # ------------------------------------------------------------------ cycle

    def step_cycle(self):
        t = self.cycle
        writes, effects = [], []
        candidates = []
        moved = []  # (proc, next pc)
        self.held = {}
        active = [p for p in self.procs if p.status in (RUNNING, BLOCKED) and p.waiting is None]
        order = sorted(active, key=lambda p: (not p.steps[p.pc].wchan, p.index))
        for p in order:
            step = p.steps[p.pc]
            if step.guards and not p.granted:
                missing = [(o, op) for _, o, op in step.guards if not self.available(p, o, op)]
                if p.req_since is None:
                    p.req_since = t
                for res, o, op in step.guards:
                    if self.policy(res) == "fifo":
                        self.arbiters[res].enqueue(p.name)
                if missing:
                    if p.blocked_on is None:
                        p.blocked_on = missing[0]
                        p.status = BLOCKED
                        self.emit(p.name, "block", f"{missing[0][0]} {missing[0][1]}")
                    continue
                if p.blocked_on is not None:
                    p.blocked_on = None
                    p.status = RUNNING
                    self.emit(p.name, "unblock", step.name)
                candidates.append(p)
                continue
            for res, _, _ in step.guards:
                self.held[res] = p.name
            nxt = self.execute(p, step, writes, effects)
            moved.append((p, nxt))

        # phase B: arbitration
        granted = self.arbitrate(candidates)
        self.pair_rendezvous(granted)
        for p in granted:
            p.granted = True
            for res, _, _ in p.steps[p.pc].guards:
                self.arbiters[res].drop(p.name)
            self.emit(p.name, "grant", ",".join(sorted({g[0] for g in p.steps[p.pc].guards})))

        # phase C: commit
        for store, name, idx, value in writes:
            if idx is None:
                store[name] = value
            elif 0 <= idx < len(store[name]):
                store[name][idx] = value
        starts, stops, wakes = [], [], []
        for e in effects:
            self.apply(e, starts, stops, wakes)
        for p, nxt in moved:
            p.granted = False
            p.req_since = None
            if nxt is None:
                p.status = BLOCKED
                self.emit(p.name, "block", f"{p.waiting[0]} {p.waiting[1]}")
                continue
            self._advance(p, nxt)
        for name, who in stops:
            q = self.by_name[name]
            if q.status != IDLE:
                q.status = IDLE
                q.waiting = None
                q.blocked_on = None
                self.emit(who, "stop", name)
        for name in starts:
            q = self.by_name[name]
            if q.status in (IDLE, ENDED):
                self._start(q)
        self.tick_timers(t, wakes)
        for q in wakes:
            self._wake(q)
        # callers whose callee has ended continue
        for q in self.procs:
            if q.waiting is not None and q.waiting[1] == "call":
                callee = self.by_name[q.waiting[0]]
                if callee.status == ENDED:
                    self._wake(q)
        for o in self.objects.values():
            if isinstance(o, Rendezvous):
                o.transfer = None
        if self.tracing:
            # events of one cycle in process declaration order
            k = len(self.trace)
            while k > 0 and self.trace[k - 1].cycle == t:
                k -= 1
            rank = {q.name: q.index for q in self.procs}
            self.trace[k:] = sorted(self.trace[k:], key=lambda e: rank.get(e.process, -1))
        self.cycle += 1

    def _advance(self, p, nxt):
        if nxt >= len(p.steps):
            p.pc = len(p.steps)
            self._end(p)
            return
        changed = nxt != p.pc
        p.pc = nxt
        if changed:
            self._enter(p)

    def _wake(self, q):
        self.emit(q.name, "unblock", f"{q.waiting[0]} {q.waiting[1]}")
        q.waiting = None
        q.status = RUNNING
        self._advance(q, q.pc + 1)

    def arbitrate(self, candidates):
        taken = set(self.held)
        out = []

        def key(p):
            pos = []
            for res, _, _ in p.steps[p.pc].guards:
                arb = self.arbiters.get(res)
                if arb is not None and arb.policy == "fifo" and p.name in arb.queue:
                    pos.append(arb.queue.index(p.name))
            return (min(pos) if pos else 1 << 30, p.index)

        for p in sorted(candidates, key=key):
            res = {g[0] for g in p.steps[p.pc].guards}
            if res & taken:
                continue
            taken |= res
            out.append(p)
        return out

    def pair_rendezvous(self, granted):
        """An unbuffered channel transfer needs its writer and reader granted together."""
        for p in list(granted):
            for _, o, op in p.steps[p.pc].guards:
                if not isinstance(self.objects.get(o), Rendezvous):
                    continue
                want = "read" if op == "write" else "write"
                partner = [q for q in self.procs if q is not p and q.waiting is None and
                           q.status in (RUNNING, BLOCKED) and q.pc < len(q.steps) and
                           any(g[1] == o and g[2] == want for g in q.steps[q.pc].guards)]
                if not partner:
                    granted.remove(p)
                    break
                partner = partner[0]
                if partner not in granted and not partner.granted:
                    granted.append(partner)

    def apply(self, e, starts, stops, wakes):
        kind, name = e[0], e[1]
        obj = self.objects.get(name)
        if kind == "push":
            obj.items.append(e[2])
        elif kind == "pop":
            if obj.items:
                obj.items.popleft()
        elif kind in ("sent", "taken"):
            pass
        elif kind == "start":
            starts.append(name)
        elif kind == "stop":
            stops.append((name, e[2]))
        elif kind == "call":
            starts.append(name)
        elif kind == "await":
            who = self.by_name[e[2]]
            if isinstance(obj, Event):
                if obj.latch and obj.latched:
                    obj.latched = False
                    wakes.append(who)
                else:
                    obj.waiters.append(who)
            elif isinstance(obj, Barrier):
                obj.waiters.append(who)
                if len(obj.waiters) >= obj.n:
                    wakes.extend(obj.waiters)
                    obj.waiters = []
            elif isinstance(obj, Timer):
                obj.waiters.append(who)
        elif isinstance(obj, Event):
            if kind == "wakeup":
                if obj.waiters:
                    wakes.extend(obj.waiters)
                    obj.waiters = []
                elif obj.latch:
                    obj.latched = True
            elif kind == "init":
                obj.latched = False
        elif isinstance(obj, Timer):
            if kind == "start":
                obj.start(self.cycle)
            elif kind == "stop":
                obj.stop()
            elif kind == "time" and e[3]:
                obj.interval = e[3][0]
            elif kind == "init":
                obj.stop()
        elif isinstance(obj, Semaphore):
            obj.apply(kind, e[3])
        elif isinstance(obj, Mutex):
            obj.apply(kind, e[2])
        elif isinstance(obj, Barrier) and kind == "init":
            obj.waiters = []

    def tick_timers(self, t, wakes):
        for o in self.objects.values():
            if isinstance(o, Timer) and o.tick(t):
                wakes.extend(o.waiters)
                o.waiters = []

    # ------------------------------------------------------------- inspection

    def detect_deadlock(self):
        """A report when nothing can make progress; None otherwise."""
        if any(p.status == RUNNING for p in self.procs):
            return None
        if any(isinstance(o, Timer) and o.running for o in self.objects.values()):
            return None
        blocked = [p for p in self.procs if p.status == BLOCKED]
        if not blocked:
            return None
        for p in blocked:
            if p.waiting is not None and p.waiting[1] == "call":
                callee = self.by_name[p.waiting[0]]
                if callee.status == RUNNING:
                    return None
        entries = []
        for p in blocked:
            o, op = p.waiting if p.waiting is not None else p.blocked_on
            kind = self.object_kind(o)
            entries.append((p.name, o, f"{kind} {op}" if kind else op))
        return DeadlockReport(self.cycle, entries)

    def object_kind(self, name):
        sym = self.tm.symbols.get(name)
        return sym.kind if sym is not None else ""

    def stores(self):
        out = {}
        for k, v in self.glob.items():
            out[k] = list(v) if isinstance(v, list) else v
        for p in self.procs:
            for k, v in p.local.items():
                out[f"{p.name}.{k}"] = list(v) if isinstance(v, list) else v
        return out

    def done(self):
        return all(p.status in (IDLE, ENDED) for p in self.procs)


def load_system(tm, programs, config=None) -> SimSystem:
    """Build a system: one program per process; only main is started."""
    return SimSystem(tm, programs, config)


def step_cycle(system: SimSystem) -> SimSystem:
    system.step_cycle()
    return system


def run(system: SimSystem, max_cycles=100_000) -> RunResult:
    if max_cycles < 1:
        raise ValueError("max_cycles must be at least 1")
    report = None
    term = "cycle-limit"
    while system.cycle < max_cycles:
        if system.done():
            term = "all-ended"
            break
        report = system.detect_deadlock()
        if report is not None:
            term = "deadlock"
            for name, o, op in report.entries:
                system.emit(name, "deadlock", f"blocked on {o} {op}")
            break
        system.step_cycle()
    else:
        if system.done():
            term = "all-ended"
    return RunResult(system.stores(), system.cycle, term, system.trace, report)


def write_trace(events, path):
    with open(path, "w") as f:
        for e in events:
            f.write(e.line() + "\n")
