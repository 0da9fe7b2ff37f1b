"""VHDL emission: one entity per process FSM and a top entity with objects and schedulers."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from ..sema.types import BOOL, INT
from .naming import CLK, RESET, EntityView, Port, RtlError, ram_word, sel_width, slv, vtype, zero
from .schedulers import SchedulerSpec, build_schedulers
from .statelist import Branch, Next, NextInstr, Select, build_state_list
from .support import SUPPORT_PACKAGE

HEADER = ["library IEEE;", "use IEEE.std_logic_1164.all;", "use IEEE.numeric_std.all;",
          "use work.conpro_support.all;", ""]
IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
RISING = f"{CLK}'event and {CLK}='1'"
SUPPORT_FILE = "conpro_support.vhdl"


@dataclass
class ProcessFsm:
    name: str
    states: list
    view: EntityView

    @property
    def entity(self):
        return f"{self.view.module}_{self.name}"

    def listing(self):
        """Readable state list: one block per state with its transition and data actions."""
        out = []
        for st in self.states:
            out.append(f"{st.name}: -- {st.comment}")
            out.append(f"  next {_transition_text(st.next)}")
            for d in st.data:
                out.append(f"  {d.kind:<6} {d.text}")
        return "\n".join(out) + "\n"


def _transition_text(t):
    if isinstance(t, Next):
        return t.state
    if isinstance(t, NextInstr):
        return "<next>"
    if isinstance(t, Branch):
        return f"if {t.cond} then {_transition_text(t.on_true)} else {_transition_text(t.on_false)}"
    if isinstance(t, Select):
        arms = "; ".join(f"{c} => {_transition_text(x)}" for c, x in t.cases)
        return f"case {t.data} ({arms})"
    return str(t)


@dataclass
class VhdlDesign:
    module: str
    files: dict = field(default_factory=dict)  # file name -> text, dependency order
    top_file: str = ""

    @property
    def top(self):
        return self.files[self.top_file]

    @property
    def entity_files(self):
        return [f for f in self.files if f != SUPPORT_FILE]

    @property
    def manifest(self):
        lines = [f"# synthesis manifest for module {self.module}, dependency order"]
        return "\n".join(lines + list(self.files)) + "\n"

    def write(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (d / name).write_text(text)
        (d / f"{self.module}.manifest").write_text(self.manifest)
        return [d / n for n in self.files] + [d / f"{self.module}.manifest"]


def build_fsms(programs, tm=None, module=None):
    out = {}
    for name, prog in programs.items():
        view = EntityView(prog, tm, module)
        out[name] = ProcessFsm(name, build_state_list(prog, view), view)
    return out


# ---------------------------------------------------------------- text helpers

class Text:
    def __init__(self):
        self.lines = []

    def __call__(self, ind, *lines):
        for ln in lines:
            self.lines.append("  " * ind + ln if ln else "")

    def text(self):
        return "\n".join(self.lines) + "\n"


def _sens(texts, known, first=()):
    seen = list(first)
    for t in texts:
        for w in IDENT.findall(t):
            if w in known and w not in seen:
                seen.append(w)
    return ", ".join(seen)


def _transition(out, ind, tr):
    if isinstance(tr, Next):
        out(ind, f"pro_state_next <= {tr.state};")
    elif isinstance(tr, Branch):
        out(ind, f"if {tr.cond} then")
        _transition(out, ind + 1, tr.on_true)
        out(ind, "else")
        _transition(out, ind + 1, tr.on_false)
        out(ind, "end if;")
    elif isinstance(tr, Select):
        out(ind, f"case {tr.data} is")
        for choice, t in tr.cases:
            out(ind + 1, f"when {choice} =>")
            _transition(out, ind + 2, t)
        out(ind, "end case;")
    else:
        raise RtlError(f"unresolved transition {tr!r}")


def _transition_texts(tr):
    if isinstance(tr, Branch):
        return [tr.cond] + _transition_texts(tr.on_true) + _transition_texts(tr.on_false)
    if isinstance(tr, Select):
        return [tr.data] + [t for _, c in tr.cases for t in _transition_texts(c)]
    return []


def _port_lines(ports):
    lines = [f"signal {p.name}: {p.direction} {p.vt};" for p in ports]
    if lines:
        lines[-1] = lines[-1][:-1]
    return lines


def _local_decls(fsm: ProcessFsm):
    """(declaration lines, reset lines, readable signal names) of locals and temporaries."""
    view = fsm.view
    decls, resets, names = [], [], []
    for d in view.program.data:
        if view.in_ram(d.name) or d.kind not in ("register", "signal", "array"):
            continue
        vt = vtype(d.ty)
        if d.kind == "array":
            decls.append(f"type {d.name}_TYPE is array(0 to {d.size - 1}) of {vt};")
            decls.append(f"signal {d.name}: {d.name}_TYPE;")
            resets.append(f"{d.name} <= (others => {zero(vt)});")
        else:
            decls.append(f"signal {d.name}: {vt};")
            resets.append(f"{d.name} <= {zero(vt)};")
        names.append(d.name)
    for n, vt in view.temps.items():
        decls.append(f"signal {n}: {vt};")
        resets.append(f"{n} <= {zero(vt)};")
        names.append(n)
    for n in names:
        if n in view.ports:
            raise RtlError(f"{fsm.name}: local {n} collides with a port name")
    return decls, resets, names


def entity_text(fsm: ProcessFsm) -> str:
    view, states = fsm.view, fsm.states
    ent = fsm.entity
    ports = view.all_ports()
    decls, resets, local_names = _local_decls(fsm)
    ins = {p.name for p in ports if p.direction == "in"} | set(local_names)
    end_port = f"PRO_{fsm.name}_END"
    start = states[0].name
    o = Text()
    o(0, *HEADER)
    o(0, f"entity {ent} is", "port(")
    o(1, "-- Connections to external objects, components and the outside world")
    o(1, *_port_lines(ports))
    o(0, ");", f"end {ent};", "", f"architecture main of {ent} is")
    o(1, "-- Local and temporary data objects")
    o(1, *decls)
    if view.consts:
        o(1, "-- Constants")
        o(1, *[view.consts[k] for k in sorted(view.consts)])
    o(1, "-- State processing")
    o(1, "type pro_states is (")
    for k, s in enumerate(states):
        sep = "," if k < len(states) - 1 else ""
        o(2, f"{s.name}{sep} -- {s.comment}")
    o(1, ");")
    o(1, f"signal pro_state: pro_states := {start};")
    o(1, f"signal pro_state_next: pro_states := {start};")
    o(0, "begin")
    # state register
    o(1, f"state_transition: process({CLK})", "begin")
    o(2, f"if {RISING} then")
    o(3, f"if {RESET}='1' or PRO_{fsm.name}_ENABLE='0' then")
    o(4, f"pro_state <= {start};")
    o(3, "else")
    o(4, "pro_state <= pro_state_next;")
    o(3, "end if;")
    o(2, "end if;")
    o(1, "end process state_transition;", "")
    # control path
    ctexts = [t for s in states for t in _transition_texts(s.next)]
    ctexts += [d.text.split("<=", 1)[1] for s in states for d in s.of_kind("signal")]
    o(1, "-- Control path: next-state selection")
    o(1, f"control_path: process({_sens(ctexts, ins, ['pro_state'])})", "begin")
    o(2, f"{end_port} <= '0';")
    o(2, "case pro_state is")
    for s in states:
        o(3, f"when {s.name} => -- {s.comment}")
        _transition(o, 4, s.next)
        for d in s.of_kind("signal"):
            o(4, d.text)
    o(2, "end case;")
    o(1, "end process control_path;", "")
    # combinational data path
    outs = [p for p in view.ports.values() if p.direction == "out"]
    dtexts = [d.text.split("<=", 1)[1] for s in states for d in s.of_kind("out", "cond", "def")]
    o(1, "-- Combinational data path: requests and shared-object writes")
    o(1, f"data_path: process({_sens(dtexts, ins, ['pro_state'])})", "begin")
    o(2, "-- Default values")
    for p in outs:
        o(2, f"{p.name} <= {zero(p.vt)};")
    o(2, "case pro_state is")
    for s in states:
        o(3, f"when {s.name} => -- {s.comment}")
        lines = [d.text for d in s.of_kind("out", "cond", "def")]
        o(4, *(lines or ["null;"]))
    o(2, "end case;")
    o(1, "end process data_path;", "")
    # clocked data transfers
    o(1, "-- Transitional data path: clocked local register transfers")
    o(1, f"data_trans: process({CLK})", "begin")
    o(2, f"if {RISING} then")
    o(3, f"if {RESET}='1' then")
    o(4, *(resets or ["null;"]))
    o(3, "else")
    o(4, "case pro_state is")
    for s in states:
        o(5, f"when {s.name} => -- {s.comment}")
        lines = [d.text for d in s.of_kind("trans", "def_trans")]
        o(6, *(lines or ["null;"]))
    o(4, "end case;")
    o(3, "end if;")
    o(2, "end if;")
    o(1, "end process data_trans;")
    o(0, "end main;")
    return o.text()


# --------------------------------------------------------------------- top level

class _Top:
    def __init__(self, tm, fsms, schedulers):
        self.tm = tm
        self.fsms = fsms
        self.specs = {s.obj: s for s in schedulers}
        self.order = list(fsms)
        self.decls = []  # architecture declarations
        self.body = Text()  # concurrent statements
        self.driven = set()
        self.signals = {}  # top signal -> type
        self.ports = []  # top entity ports
        self.by_key = {}  # object key -> {process: {suffix: Port}}
        for p, fsm in fsms.items():
            for port in fsm.view.ports.values():
                self.by_key.setdefault(port.key, {}).setdefault(p, {})[port.suffix] = port

    # naming
    def sig(self, key, proc, suffix):
        return f"{key}_{proc}_{suffix}"

    def users(self, key, spec=None):
        got = self.by_key.get(key, {})
        order = spec.accessors if spec is not None else self.order
        rest = [p for p in self.order if p in got and p not in order]
        return [p for p in order if p in got] + rest

    def has(self, key, proc, suffix):
        return suffix in self.by_key.get(key, {}).get(proc, {})

    def declare(self, line):
        if line not in self.decls:
            self.decls.append(line)

    # arbitration
    def arbiter(self, key, policy, requests, resets, defaults, extra_vars=()):
        """Clocked scheduler process granting at most one request per cycle.

        requests: (accessor number, condition, actions, guard signal) in priority order.
        """
        b = self.body
        accessors = []
        for k, *_ in requests:
            if k not in accessors:
                accessors.append(k)
        n = max(1, len(accessors))
        fifo = policy == "fifo" and requests
        if fifo:
            self.declare(f"signal {key}_QUEUE: conpro_queue(0 to {n - 1});")
            self.declare(f"signal {key}_QLEN: integer range 0 to {n};")
        b(1, f"{key}_SCHED: process({CLK})")
        if fifo:
            b(2, f"variable q: conpro_queue(0 to {n - 1});", f"variable n: integer range 0 to {n};",
              "variable granted: boolean;")
        b(2, *extra_vars)
        b(1, "begin")
        b(2, f"if {RISING} then")
        b(3, f"if {RESET}='1' then")
        resets = list(resets) + [f"{gd} <= '1';" for gd in _uniq(r[3] for r in requests)]
        if fifo:
            resets += [f"{key}_QUEUE <= (others => 0);", f"{key}_QLEN <= 0;"]
        b(4, *(resets or ["null;"]))
        b(3, "else")
        b(4, *defaults)
        b(4, *[f"{gd} <= '1';" for gd in _uniq(r[3] for r in requests)])
        if not requests:
            b(4, "null;")
        elif fifo:
            b(4, f"q := {key}_QUEUE;", f"n := {key}_QLEN;", "granted := false;")
            for k in accessors:
                conds = " or ".join(f"({c})" for j, c, _, _ in requests if j == k)
                b(4, f"if {conds} then", f"  conpro_enqueue(q, n, {k});", "end if;")
            b(4, f"for j in 0 to {n - 1} loop")
            b(5, "if not granted and j < n then")
            first = True
            for k, cond, actions, gd in requests:
                b(6, f"{'if' if first else 'elsif'} q(j) = {k} and {cond} then")
                first = False
                b(7, *actions, f"{gd} <= '0';", f"conpro_dequeue(q, n, {k});", "granted := true;")
            b(6, "end if;")
            b(5, "end if;")
            b(4, "end loop;")
            b(4, f"{key}_QUEUE <= q;", f"{key}_QLEN <= n;")
        else:
            first = True
            for k, cond, actions, gd in requests:
                b(4, f"{'if' if first else 'elsif'} {cond} then")
                first = False
                b(5, *actions, f"{gd} <= '0';")
            b(4, "end if;")
        b(3, "end if;")
        b(2, "end if;")
        b(1, f"end process {key}_SCHED;", "")

    def policy(self, name):
        spec = self.specs.get(name)
        return spec.policy if spec is not None else "static"

    def numbered(self, key, spec=None):
        return [(k + 1, p) for k, p in enumerate(self.users(key, spec))]

    # objects
    def emit_objects(self):
        tm = self.tm
        rams = {}
        for name, s in tm.symbols.items():
            if s.in_ram:
                rams.setdefault(s.block, []).append(s)
                continue
            kind = s.kind
            if kind in ("reg", "sig"):
                self.register(s)
            elif kind == "array":
                self.array(s)
            elif kind == "semaphore":
                self.semaphore(s)
            elif kind == "mutex":
                self.mutex(s)
            elif kind == "event":
                self.event(s)
            elif kind == "barrier":
                self.barrier(s)
            elif kind == "timer":
                self.timer(s)
            elif kind in ("queue", "channel"):
                self.queue(s)
            elif kind == "random":
                self.random(s)
        for p in tm.processes:
            for s in p.locals.values():
                if s.in_ram:
                    rams.setdefault(s.block, []).append(s)
        for block, syms in rams.items():
            self.ram(block, syms)
        for name in self.order:
            self.process_control(name)

    def register(self, s):
        from .naming import ROLE_PREFIX
        key = ROLE_PREFIX.get(s.role, "REG_") + s.name
        vt = vtype(s.type)
        self.declare(f"signal {key}: {vt};")
        spec = self.specs.get(s.name)
        writers = [(k, p) for k, p in self.numbered(key, spec) if self.has(key, p, "WE")]
        reqs = []
        for k, p in writers:
            we, wr = self.sig(key, p, "WE"), self.sig(key, p, "WR")
            gd = self.sig(key, p, "GD") if self.has(key, p, "GD") else None
            cond = f"{we} = '1'" + (f" and {gd} = '1'" if gd else "")
            reqs.append((k, cond, [f"{key} <= {wr};"], gd))
        resets = [f"{key} <= {zero(vt)};"]
        if any(r[3] is None for r in reqs):
            self.plain_writer(key, reqs, resets)
        else:
            self.arbiter(key, self.policy(s.name), reqs, resets, [])
        if s.exported:
            w = s.type.width
            self.ports.append(f"signal {s.name}_RD: out {slv(w)};")
            src = {INT: f"I_to_L({key})", BOOL: f"B_to_V({key})"}.get(s.type.base, key)
            self.body(1, f"{s.name}_RD <= {src};", "")

    def plain_writer(self, key, reqs, resets):
        """Write multiplexer of a register serialized elsewhere (function arguments/results)."""
        b = self.body
        b(1, f"{key}_WRITE: process({CLK})", "begin")
        b(2, f"if {RISING} then")
        b(3, f"if {RESET}='1' then")
        b(4, *resets)
        if reqs:
            b(3, "else")
            first = True
            for k, cond, actions, _ in reqs:
                b(4, f"{'if' if first else 'elsif'} {cond} then")
                first = False
                b(5, *actions)
            b(4, "end if;")
        b(3, "end if;")
        b(2, "end if;")
        b(1, f"end process {key}_WRITE;", "")

    def array(self, s):
        key = f"ARRAY_{s.name}"
        vt = vtype(s.type)
        n = s.size
        self.declare(f"type {key}_TYPE is array(0 to {n - 1}) of {vt};")
        self.declare(f"signal {key}: {key}_TYPE;")
        spec = self.specs.get(s.name)
        reqs = []
        for k, p in self.numbered(key, spec):
            sel = f"to_integer(unsigned({self.sig(key, p, 'SEL')}))"
            if self.has(key, p, "RD"):
                rd = self.sig(key, p, "RD")
                self.body(1, f"{rd} <= {key}({sel}) when {sel} < {n} else {zero(vt)};")
                self.driven.add(rd)
            if self.has(key, p, "WE"):
                we, wr, gd = (self.sig(key, p, x) for x in ("WE", "WR", "GD"))
                act = [f"if {sel} < {n} then", f"  {key}({sel}) <= {wr};", "end if;"]
                reqs.append((k, f"{we} = '1' and {gd} = '1'", act, gd))
        self.body(0, "")
        self.arbiter(key, self.policy(s.name), reqs, [f"{key} <= (others => {zero(vt)});"], [])
        if s.exported:
            w = sel_width(n)
            self.ports.append(f"signal {s.name}_SEL: in {slv(w)};")
            self.ports.append(f"signal {s.name}_RD: out {slv(s.type.width)};")
            sel = f"to_integer(unsigned({s.name}_SEL))"
            src = {INT: f"I_to_L({key}({sel}))", BOOL: f"B_to_V({key}({sel}))"}.get(
                s.type.base, f"{key}({sel})")
            self.body(1, f"{s.name}_RD <= {src} when {sel} < {n} else {zero(slv(s.type.width))};", "")

    def ram(self, block, syms):
        key = f"RAM_{block}"
        w = ram_word(self.tm, block)
        size = max((s.offset or 0) + max(1, s.size) for s in syms)
        self.declare(f"type {key}_TYPE is array(0 to {size - 1}) of {slv(w)};")
        self.declare(f"signal {key}: {key}_TYPE;")
        reqs, resets = [], [f"{key} <= (others => {zero(slv(w))});"]
        for k, p in self.numbered(key):
            addr, gd = self.sig(key, p, "ADDR"), self.sig(key, p, "GD")
            if self.has(key, p, "WE"):
                we, wr = self.sig(key, p, "WE"), self.sig(key, p, "WR")
                act = [f"if {addr} < {size} then", f"  {key}({addr}) <= {wr};", "end if;"]
                reqs.append((k, f"{we} = '1' and {gd} = '1'", act, gd))
            if self.has(key, p, "RE"):
                re_, rd = self.sig(key, p, "RE"), self.sig(key, p, "RD")
                act = [f"if {addr} < {size} then", f"  {rd} <= {key}({addr});", "else",
                       f"  {rd} <= {zero(slv(w))};", "end if;"]
                reqs.append((k, f"{re_} = '1' and {gd} = '1'", act, gd))
                resets.append(f"{rd} <= {zero(slv(w))};")
                self.driven.add(rd)
        self.arbiter(key, self.policy(block), reqs, resets, [])

    def semaphore(self, s):
        key = f"SEMA_{s.name}"
        depth = s.params.get("depth", 8)
        init = _config_arg(self.tm, s.name, "init", s.params.get("init", 0))
        cnt = f"{key}_COUNT"
        self.declare(f"signal {cnt}: integer range 0 to {depth};")
        reqs = []
        spec = self.specs.get(s.name)
        for k, p in self.numbered(key, spec):
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "INIT"):
                arg = self.sig(key, p, "INIT_ARG0") if self.has(key, p, "INIT_ARG0") else "0"
                reqs.append((k, f"{self.sig(key, p, 'INIT')} = '1'",
                             [f"{cnt} <= conpro_clip({arg}, 0, {depth});"], gd))
            if self.has(key, p, "DOWN"):
                reqs.append((k, f"{self.sig(key, p, 'DOWN')} = '1' and {cnt} > 0",
                             [f"{cnt} <= {cnt} - 1;"], gd))
            if self.has(key, p, "UP"):
                reqs.append((k, f"{self.sig(key, p, 'UP')} = '1' and {cnt} < {depth}",
                             [f"{cnt} <= {cnt} + 1;"], gd))
        self.arbiter(key, self.policy(s.name), reqs, [f"{cnt} <= {min(init, depth)};"], [])

    def mutex(self, s):
        key = f"MUTEX_{s.name}"
        spec = self.specs.get(s.name)
        users = self.numbered(key, spec)
        own = f"{key}_OWNER"
        self.declare(f"signal {own}: integer range 0 to {max(1, len(users))};")
        reqs = []
        for k, p in users:
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "LOCK"):
                reqs.append((k, f"{self.sig(key, p, 'LOCK')} = '1' and {own} = 0",
                             [f"{own} <= {k};"], gd))
            if self.has(key, p, "UNLOCK"):
                reqs.append((k, f"{self.sig(key, p, 'UNLOCK')} = '1'",
                             [f"if {own} = {k} then", f"  {own} <= 0;", "end if;"], gd))
            if self.has(key, p, "INIT"):
                reqs.append((k, f"{self.sig(key, p, 'INIT')} = '1'", [f"{own} <= 0;"], gd))
        self.arbiter(key, self.policy(s.name), reqs, [f"{own} <= 0;"], [])

    def _release_all(self, key, name, waits, fire, flag_lines, resets):
        """Clocked process releasing every waiting accessor at once (events, barriers, timers)."""
        b = self.body
        b(1, f"{key}_SCHED: process({CLK})", "begin")
        b(2, f"if {RISING} then")
        b(3, f"if {RESET}='1' then")
        gds = _uniq(gd for _, gd, _ in waits)
        b(4, *resets, *[f"{gd} <= '1';" for gd in gds])
        b(3, "else")
        b(4, *[f"{gd} <= '1';" for gd in gds])
        for req, gd, cond in waits:
            b(4, f"if {req} = '1' and {gd} = '1' and {cond} then", f"  {gd} <= '0';", "end if;")
        b(4, *flag_lines)
        b(3, "end if;")
        b(2, "end if;")
        b(1, f"end process {key}_SCHED;", "")

    def event(self, s):
        key = f"EVENT_{s.name}"
        flag, fire = f"{key}_FLAG", f"{key}_FIRE"
        self.declare(f"signal {flag}: std_logic;")
        self.declare(f"signal {fire}: std_logic;")
        users = self.users(key, self.specs.get(s.name))
        wakes = [self.sig(key, p, "WAKEUP") for p in users if self.has(key, p, "WAKEUP")]
        awaits = [self.sig(key, p, "AWAIT") for p in users if self.has(key, p, "AWAIT")]
        self.body(1, f"{fire} <= {' or '.join(wakes) if wakes else chr(39) + '0' + chr(39)};")
        waits = []
        for p in users:
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "WAKEUP"):
                waits.append((self.sig(key, p, "WAKEUP"), gd, "true"))
            if self.has(key, p, "AWAIT"):
                waits.append((self.sig(key, p, "AWAIT"), gd, f"({fire} = '1' or {flag} = '1')"))
        latch = bool(s.params.get("latch", False))
        anyw = " or ".join(f"{a} = '1'" for a in awaits) or "false"
        lines = [f"if {anyw} then", f"  {flag} <= '0';"]
        if latch:
            lines += [f"elsif {fire} = '1' then", f"  {flag} <= '1';"]
        lines += ["end if;"]
        self._release_all(key, s.name, waits, fire, lines, [f"{flag} <= '0';"])

    def barrier(self, s):
        key = f"BARRIER_{s.name}"
        users = self.users(key, self.specs.get(s.name))
        awaits = [self.sig(key, p, "AWAIT") for p in users if self.has(key, p, "AWAIT")]
        full = " and ".join(f"{a} = '1'" for a in awaits) or "false"
        waits = [(self.sig(key, p, "AWAIT"), self.sig(key, p, "GD"), f"({full})")
                 for p in users if self.has(key, p, "AWAIT")]
        self._release_all(key, s.name, waits, None, [], [])

    def timer(self, s):
        key = f"TIMER_{s.name}"
        interval = _config_arg(self.tm, s.name, "time", s.params.get("interval", 0))
        mode = s.params.get("mode", 0)
        cnt, run, fire = f"{key}_COUNT", f"{key}_RUN", f"{key}_FIRE"
        self.declare(f"signal {cnt}: integer range 0 to {max(1, interval)};")
        self.declare(f"signal {run}: std_logic;")
        self.declare(f"signal {fire}: std_logic;")
        users = self.users(key, self.specs.get(s.name))
        waits, lines = [], []
        for p in users:
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "AWAIT"):
                waits.append((self.sig(key, p, "AWAIT"), gd, f"{fire} = '1'"))
            for op in ("START", "STOP", "INIT", "TIME"):
                if self.has(key, p, op):
                    waits.append((self.sig(key, p, op), gd, "true"))
        reload = f"{cnt} <= {max(1, interval)};"
        lines += [f"{fire} <= '0';", f"if {run} = '1' then", f"  if {cnt} <= 1 then",
                  f"    {fire} <= '1';", f"    {reload}"]
        if mode == 1:
            lines += [f"    {run} <= '0';"]
        lines += ["  else", f"    {cnt} <= {cnt} - 1;", "  end if;", "end if;"]
        for p in users:
            if self.has(key, p, "START"):
                lines += [f"if {self.sig(key, p, 'START')} = '1' then", f"  {run} <= '1';",
                          f"  {reload}", "end if;"]
            if self.has(key, p, "STOP"):
                lines += [f"if {self.sig(key, p, 'STOP')} = '1' then", f"  {run} <= '0';", "end if;"]
        self._release_all(key, s.name, waits, fire, lines,
                          [f"{cnt} <= {max(1, interval)};", f"{run} <= '0';", f"{fire} <= '0';"])

    def queue(self, s):
        prefix = "QUEUE" if s.kind == "queue" else "CHAN"
        key = f"{prefix}_{s.name}"
        depth = s.params.get("depth", 8) if s.kind == "queue" else 1
        vt = vtype(s.type)
        data, head, tail, cnt = (f"{key}_{x}" for x in ("DATA", "HEAD", "TAIL", "COUNT"))
        self.declare(f"type {key}_TYPE is array(0 to {depth - 1}) of {vt};")
        self.declare(f"signal {data}: {key}_TYPE;")
        self.declare(f"signal {head}: integer range 0 to {depth - 1};")
        self.declare(f"signal {tail}: integer range 0 to {depth - 1};")
        self.declare(f"signal {cnt}: integer range 0 to {depth};")
        nxt = lambda x: f"{x} <= 0;" if depth == 1 else (  # noqa: E731
            f"if {x} = {depth - 1} then {x} <= 0; else {x} <= {x} + 1; end if;")
        reqs = []
        resets = [f"{head} <= 0;", f"{tail} <= 0;", f"{cnt} <= 0;"]
        for k, p in self.numbered(key, self.specs.get(s.name)):
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "WE"):
                reqs.append((k, f"{self.sig(key, p, 'WE')} = '1' and {gd} = '1' and {cnt} < {depth}",
                             [f"{data}({tail}) <= {self.sig(key, p, 'WR')};", nxt(tail),
                              f"{cnt} <= {cnt} + 1;"], gd))
            if self.has(key, p, "RE"):
                rd = self.sig(key, p, "RD")
                reqs.append((k, f"{self.sig(key, p, 'RE')} = '1' and {gd} = '1' and {cnt} > 0",
                             [f"{rd} <= {data}({head});", nxt(head), f"{cnt} <= {cnt} - 1;"], gd))
                resets.append(f"{rd} <= {zero(vt)};")
                self.driven.add(rd)
        self.arbiter(key, self.policy(s.name), reqs, resets, [])

    def random(self, s):
        key = f"RANDOM_{s.name}"
        w = s.params.get("datawidth", 8)
        st = f"{key}_STATE"
        self.declare(f"signal {st}: {slv(w)};")
        seed = _config_arg(self.tm, s.name, "seed", s.params.get("seed", 0))
        reqs, resets = [], [f"{st} <= {_bits(seed or 1, w)};"]
        for k, p in self.numbered(key, self.specs.get(s.name)):
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "READ"):
                rd = self.sig(key, p, "RD")
                reqs.append((k, f"{self.sig(key, p, 'READ')} = '1'",
                             [f"{rd} <= {st};", f"{st} <= conpro_lfsr({st});"], gd))
                resets.append(f"{rd} <= {zero(slv(w))};")
                self.driven.add(rd)
            if self.has(key, p, "SEED"):
                arg = self.sig(key, p, "SEED_ARG0") if self.has(key, p, "SEED_ARG0") else "1"
                reqs.append((k, f"{self.sig(key, p, 'SEED')} = '1'",
                             [f"{st} <= std_logic_vector(to_unsigned({arg}, {w}));"], gd))
        self.arbiter(key, self.policy(s.name), reqs, resets, [])

    def process_control(self, name):
        key = f"PRO_{name}"
        en, end = f"{key}_ENABLE", f"{key}_END"
        self.declare(f"signal {en}: std_logic;")
        self.declare(f"signal {end}: std_logic;")
        boot = "'1'" if name == "main" else "'0'"
        reqs = []
        for k, p in self.numbered(key, self.specs.get(name)):
            gd = self.sig(key, p, "GD")
            if self.has(key, p, "START"):
                reqs.append((k, f"{self.sig(key, p, 'START')} = '1' and {gd} = '1'",
                             [f"{en} <= '1';"], gd))
            if self.has(key, p, "STOP"):
                reqs.append((k, f"{self.sig(key, p, 'STOP')} = '1' and {gd} = '1'",
                             [f"{en} <= '0';"], gd))
            if self.has(key, p, "CALL"):
                reqs.append((k, f"{self.sig(key, p, 'CALL')} = '1' and {gd} = '1' and {end} = '1'",
                             [f"{en} <= '0';"], gd))
        calls = [self.sig(key, p, "CALL") for _, p in self.numbered(key) if self.has(key, p, "CALL")]
        defaults = []
        if calls:
            anyc = " or ".join(f"{c} = '1'" for c in calls)
            defaults = [f"if ({anyc}) and {end} = '0' then", f"  {en} <= '1';", "end if;"]
        self.arbiter(key, self.policy(name), reqs, [f"{en} <= {boot};"], defaults)

    # assembly
    def connections(self):
        """Port map lines per process and the top signals they need."""
        maps = {}
        for p, fsm in self.fsms.items():
            lines = []
            for port in fsm.view.all_ports():
                actual = self.actual(port, p)
                lines.append(f"{port.name} => {actual}")
            maps[p] = lines
        return maps

    def actual(self, port: Port, proc):
        if port.key is None:
            return port.name
        if port.key.startswith("REG_") and port.suffix == "RD":
            return port.key
        name = port.top_signal(proc)
        old = self.signals.get(name)
        if old is not None and old != port.vt:
            raise RtlError(f"top signal {name} declared with two types")
        self.signals[name] = port.vt
        return name


def _uniq(xs):
    out = []
    for x in xs:
        if x is not None and x not in out:
            out.append(x)
    return out


def _bits(v, w):
    return '"' + format(v & ((1 << w) - 1), f"0{w}b") + '"'


def _config_arg(tm, obj, method, default):
    for call in tm.config:
        if call.obj.id == obj and call.method == method and call.args:
            return call.args[0]
    return default


def top_text(module, tm, fsms, schedulers) -> str:
    t = _Top(tm, fsms, schedulers)
    t.emit_objects()
    maps = t.connections()
    o = Text()
    o(0, *HEADER)
    o(0, f"entity MOD_{module} is", "port(")
    o(1, "-- Connections to the outside world")
    ports = t.ports + ["signal CLK: in std_logic;", "signal RESET: in std_logic"]
    o(1, *ports)
    o(0, ");", f"end MOD_{module};", "", f"architecture main of MOD_{module} is")
    o(1, "-- Process instances")
    for p, fsm in fsms.items():
        o(1, f"component {fsm.entity}", "port(")
        o(2, *_port_lines(fsm.view.all_ports()))
        o(1, ");", "end component;")
    o(1, "-- Shared objects and process control")
    o(1, *t.decls)
    o(1, "-- Component connections")
    declared = {ln.split(":")[0].split()[-1] for ln in t.decls if ln.startswith("signal ")}
    for name, vt in t.signals.items():
        if name not in declared:
            o(1, f"signal {name}: {vt};")
    o(1, f"signal {CLK}: std_logic;", f"signal {RESET}: std_logic;")
    o(0, "begin")
    o(1, f"{CLK} <= CLK;", f"{RESET} <= RESET;", "")
    o.lines.extend(t.body.lines)
    # in-ports of components that no object drives stay at their reset value
    driven = set(t.driven) | _assigned(t.body.lines)
    for p, fsm in fsms.items():
        for port in fsm.view.all_ports():
            if port.direction == "in" and port.key is not None:
                a = t.actual(port, p)
                if a not in driven and a not in declared and a.startswith(port.key + "_"):
                    o(1, f"{a} <= {zero(port.vt)};")
                    driven.add(a)
    for p, fsm in fsms.items():
        o(1, f"INST_{p}: {fsm.entity}", "port map(")
        lines = maps[p]
        o(2, *[ln + ("," if k < len(lines) - 1 else "") for k, ln in enumerate(lines)])
        o(1, ");")
    o(0, "end main;")
    return o.text()


def _assigned(lines):
    out = set()
    for ln in lines:
        m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(\(.*\))?\s*<=", ln)
        if m:
            out.add(m.group(1))
    return out


def emit_vhdl(fsms, schedulers: list[SchedulerSpec] | None, tm, module=None) -> VhdlDesign:
    """Entity files in dependency order: support package, processes, then the top."""
    module = module or tm.name
    if schedulers is None:
        schedulers = build_schedulers(tm)
    design = VhdlDesign(module)
    design.files[SUPPORT_FILE] = SUPPORT_PACKAGE
    names = set()
    for p, fsm in fsms.items():
        fname = f"{fsm.entity}.vhdl"
        if fname in names or fsm.entity == f"MOD_{module}":
            raise RtlError(f"entity name {fsm.entity} collides after mangling")
        names.add(fname)
        design.files[fname] = entity_text(fsm)
    design.top_file = f"{module}.vhdl"
    if design.top_file in names:
        raise RtlError(f"top file {design.top_file} collides with a process entity")
    design.files[design.top_file] = top_text(module, tm, fsms, schedulers)
    return design


def compile_design(compiled, module=None, overrides=None) -> VhdlDesign:
    """Convenience: state lists, schedulers and VHDL text for a compiled module."""
    tm = compiled.tm
    fsms = build_fsms(compiled.programs, tm, module or tm.name)
    return emit_vhdl(fsms, build_schedulers(tm, overrides), tm, module)

