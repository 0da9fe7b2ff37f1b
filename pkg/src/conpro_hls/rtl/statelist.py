"""State-transition lists: one FSM state per microcode step plus start and end."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..mcode.asmtext import const_default, instr_text
from ..mcode.instr import END, MProgram, Operand, groups, step_body
from ..sema.types import BOOL, INT, LOGIC, T, signed_bits_needed
from .exprs import V, as_cond, as_int, as_logic, binary, convert, unary
from .naming import EntityView, RtlError, sel_width, slv, vtype


@dataclass
class Next:
    state: str


@dataclass
class NextInstr:
    pass


@dataclass
class Branch:
    cond: str
    on_true: object
    on_false: object


@dataclass
class Select:
    data: str
    cases: list  # (choice text, transition)


@dataclass
class Data:
    """One data action; kind is one of the Data_* variants, text a VHDL statement."""
    kind: str  # in out trans signal cond top top_def def def_trans
    text: str


@dataclass
class StateEntry:
    name: str
    next: object
    data: list = field(default_factory=list)
    comment: str = ""
    guards: list = field(default_factory=list)  # guard-unsatisfied conditions

    @property
    def guarded(self):
        return bool(self.guards)

    def of_kind(self, *kinds):
        return [d for d in self.data if d.kind in kinds]


def state_names(program: MProgram):
    """State name per step, label -> state map, and the start/end names."""
    p = program.name
    start, end = f"S_{p}_start", f"S_{p}_end"
    names, labels = [], {END: end}
    prev, sub = p, 0
    for lbs, instrs in groups(program.code):
        if not instrs:
            for lb in lbs:
                labels[lb] = end
            continue
        if lbs:
            prev, sub = lbs[-1], 0
            name = f"S_{prev}"
        else:
            sub += 1
            name = f"S_{prev}_{sub}"
        names.append(name)
        for lb in lbs:
            labels[lb] = name
    seen = {start, end}
    for n in names:
        if n in seen:
            raise RtlError(f"{p}: state name {n} is not unique")
        seen.add(n)
    return names, labels, start, end


class _StepBuilder:
    """Data actions and guards of one step."""

    def __init__(self, view: EntityView):
        self.v = view
        self.data = []
        self.guards = []
        self.immeds = {}
        self.selectors = {}  # selector port -> value text

    def out(self, text, kind="out"):
        if all(d.text != text for d in self.data):
            self.data.append(Data(kind, text))

    def guard(self, cond):
        if cond not in self.guards:
            self.guards.append(cond)

    def data_guard(self, key):
        gd = self.v.port(key, "GD", "in", "std_logic")
        self.guard(f"{gd} = '1'")
        return gd

    def select(self, key, index: V, size, suffix="SEL"):
        w = sel_width(size)
        port = self.v.port(key, suffix, "out", slv(w))
        val = convert(index, T(LOGIC, w))
        text = f"({val.text})"
        old = self.selectors.get(port)
        if old is not None and old != text:
            raise RtlError(f"{self.v.name}: {port} needs two different values in one state")
        self.selectors[port] = text
        self.out(f"{port} <= {text};")

    # ------------------------------------------------------------- operands

    def const(self, op: Operand, ty):
        if ty is None:
            ty = T(INT, signed_bits_needed(op.value))
        return V(self.v.const(op.value, ty), ty)

    def read(self, op: Operand, ty=None) -> V:
        if op.kind == "const":
            return self.const(op, op.ty or ty)
        if op.kind == "immed":
            got = self.immeds.get(op.value)
            if got is None:
                raise RtlError(f"{self.v.name}: $immed.[{op.value}] read before it is written")
            val = got
        elif op.kind in ("temp", "alu"):
            val = V(self.v.temp(op.kind, op.value, op.ty), op.ty)
        else:
            val = self._read_obj(op)
        if op.conv is not None:
            val = convert(val, op.conv)
        return val

    def _index(self, op):
        return self.read(op.index)

    def _read_obj(self, op: Operand) -> V:
        v, name = self.v, op.name
        d = v.local.get(name) or v.imported.get(name)
        if d is None:
            raise RtlError(f"{v.name}: unknown object {name}")
        ty = op.ty or d.ty
        if v.in_ram(name):
            key = f"RAM_{v.ram_block(name)}"
            w = v.ram_width(name)
            self._ram_addr(key, op)
            self.out(f"{key}_RE <= '1';")
            v.port(key, "RE", "out", "std_logic")
            self.data_guard(key)
            rd = v.port(key, "RD", "in", slv(w))
            return convert(V(rd, T(LOGIC, w)), ty)
        if name in v.local:
            if d.kind == "array":
                return V(f"{name}({self._int_index(op)})", ty)
            return V(name, ty)
        if d.kind == "array":
            key = f"ARRAY_{name}"
            rd = v.port(key, "RD", "in", _vt(ty))
            self.select(key, self._index(op), d.size)
            return V(rd, ty)
        if d.kind in ("queue", "channel"):
            key = v.obj_key(name)
            rd = v.port(key, "RD", "in", _vt(ty))
            re = v.port(key, "RE", "out", "std_logic")
            self.out(f"{re} <= '1';")
            self.data_guard(key)
            return V(rd, ty)
        key = v.reg_key(name)
        return V(v.port(key, "RD", "in", _vt(ty)), ty)

    def _int_index(self, op):
        return as_int(self._index(op))

    def _ram_addr(self, key, op):
        v = self.v
        base = v.ram_offset(op.name)
        addr = str(base)
        if op.index is not None:
            addr = f"{base} + {self._int_index(op)}" if base else self._int_index(op)
        port = v.port(key, "ADDR", "out", "integer")
        text = f"{port} <= {addr};"
        old = self.selectors.get(port)
        if old is not None and old != addr:
            raise RtlError(f"{v.name}: {port} needs two different values in one state")
        self.selectors[port] = addr
        self.out(text)

    # -------------------------------------------------------------- writes

    def write(self, dst: Operand, val: V):
        v = self.v
        if dst.kind == "immed":
            self.immeds[dst.value] = val
            return
        ty = dst.ty
        val = convert(val, ty) if not val.cond else as_logic(val)
        if dst.kind in ("temp", "alu"):
            self.out(f"{v.temp(dst.kind, dst.value, ty)} <= {val.text};", "trans")
            return
        name = dst.name
        d = v.local.get(name) or v.imported.get(name)
        if d is None:
            raise RtlError(f"{v.name}: unknown object {name}")
        if v.in_ram(name):
            key = f"RAM_{v.ram_block(name)}"
            w = v.ram_width(name)
            self._ram_addr(key, dst)
            wr = v.port(key, "WR", "out", slv(w))
            we = v.port(key, "WE", "out", "std_logic")
            self.out(f"{wr} <= {convert(val, T(LOGIC, w)).text};")
            self.out(f"{we} <= '1';")
            self.data_guard(key)
            return
        if name in v.local:
            if d.kind == "array":
                self.out(f"{name}({self._int_index(dst)}) <= {val.text};", "trans")
            else:
                self.out(f"{name} <= {val.text};", "trans")
            return
        if d.kind == "array":
            key = f"ARRAY_{name}"
            wr = v.port(key, "WR", "out", _vt(ty))
            we = v.port(key, "WE", "out", "std_logic")
            self.out(f"{wr} <= {val.text};")
            self.out(f"{we} <= '1';")
            self.select(key, self._index(dst), d.size)
            self.data_guard(key)
            return
        if d.kind in ("queue", "channel"):
            key = v.obj_key(name)
            wr = v.port(key, "WR", "out", _vt(ty))
            we = v.port(key, "WE", "out", "std_logic")
            self.out(f"{wr} <= {val.text};")
            self.out(f"{we} <= '1';")
            self.data_guard(key)
            return
        key = v.reg_key(name)
        wr = v.port(key, "WR", "out", _vt(ty))
        we = v.port(key, "WE", "out", "std_logic")
        self.out(f"{wr} <= {val.text};")
        self.out(f"{we} <= '1';")
        if v.role(name) not in ("arg", "ret", "exc"):
            self.data_guard(key)

    # -------------------------------------------------------- instructions

    def instr(self, ins):
        if ins.op == "move":
            dst, src = ins.args
            self.write(dst, self.read(src, const_default(ins, 1)))
        elif ins.op == "expr":
            if len(ins.args) == 3:
                dst, operator, a = ins.args
                self.write(dst, unary(operator, self.read(a, const_default(ins, 2))))
            else:
                dst, a, operator, b = ins.args
                va = self.read(a, const_default(ins, 1))
                vb = self.read(b, const_default(ins, 3))
                if a.is_const and not b.is_const and va.ty != vb.ty and operator not in ("lsl", "lsr"):
                    va = self.read(a, vb.ty)
                self.write(dst, binary(operator, va, vb))
        elif ins.op == "fun":
            self.method(ins)

    def method(self, ins):
        v = self.v
        target, m = ins.args[0].name, ins.args[1]
        args = ins.args[2:]
        key = v.obj_key(target)
        d = v.imported.get(target)
        if d is not None and d.kind == "process":
            port = v.port(key, m.upper(), "out", "std_logic")
            self.out(f"{port} <= '1';")
            self.data_guard(key)
            return
        gd = v.port(key, "GD", "in", "std_logic")
        port = v.port(key, m.upper(), "out", "std_logic")
        self.out(f"{port} <= {gd};")
        self.guard(f"not(({gd}) = ('0'))")
        if d is not None and d.detail == "random" and m == "read" and args:
            dst = args[0]
            w = v.random_width(target, dst.ty)
            rd = v.port(key, "RD", "in", slv(w))
            self.write(dst, V(rd, T(LOGIC, w)))
            return
        for k, a in enumerate(args):
            port = v.port(key, f"{m.upper()}_ARG{k}", "out", "integer")
            text = str(a.value) if a.is_const else as_int(self.read(a))
            self.out(f"{port} <= {text};")


def _vt(ty):
    return vtype(ty)


def _resolve(tr, labels, following):
    if isinstance(tr, NextInstr):
        return Next(following)
    if isinstance(tr, Next):
        return tr
    if isinstance(tr, Branch):
        return Branch(tr.cond, _resolve(tr.on_true, labels, following),
                      _resolve(tr.on_false, labels, following))
    return tr


def build_state_list(program: MProgram, view: EntityView | None = None, tm=None):
    """States of one process: start, one per step (a bind group is one step), end.

    view collects the entity ports as a side effect; pass one to keep them.
    """
    view = view or EntityView(program, tm)
    names, labels, start, end = state_names(program)
    steps = [instrs for _, instrs in groups(program.code) if instrs]
    out = [StateEntry(start, Next(names[0] if names else end), [], "PROCESS")]
    for k, instrs in enumerate(steps):
        name = names[k]
        following = names[k + 1] if k + 1 < len(names) else end
        b = _StepBuilder(view)
        nxt = NextInstr()
        for ins in step_body(instrs):
            if ins.op == "jump":
                nxt = Next(_label(labels, ins.args[0], program))
            elif ins.op == "falsejump":
                cond = as_cond(b.read(ins.args[0], T(BOOL)))
                nxt = Branch(cond, NextInstr(), Next(_label(labels, ins.args[1], program)))
            else:
                b.instr(ins)
        if b.guards:
            nxt = Branch(" or ".join(b.guards), Next(name), nxt)
        nxt = _resolve(nxt, labels, following)
        comment = instr_text(step_body(instrs)[0])
        out.append(StateEntry(name, nxt, b.data, comment, list(b.guards)))
    end_data = [Data("signal", f"PRO_{program.name}_END <= '1';")]
    out.append(StateEntry(end, Next(end), end_data, "PROCESS"))
    return out


def _label(labels, lb, program):
    try:
        return labels[lb]
    except KeyError:
        raise RtlError(f"{program.name}: unresolved label {lb}") from None


def successors(entry: StateEntry):
    """All states a transition may lead to."""
    out = []

    def walk(t):
        if isinstance(t, Next):
            out.append(t.state)
        elif isinstance(t, Branch):
            walk(t.on_true)
            walk(t.on_false)
        elif isinstance(t, Select):
            for _, c in t.cases:
                walk(c)

    walk(entry.next)
    return out
