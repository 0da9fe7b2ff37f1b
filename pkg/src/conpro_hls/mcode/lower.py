"""Lowering of typed process bodies to linear microcode."""
from __future__ import annotations

import dataclasses

from ..diagnostics import InternalError
from ..frontend import ast as A
from ..sema.symbols import STORAGE
from ..sema.types import BOOL, INT, LOGIC, T, convert
from .instr import (END, Decl, Instr, MProgram, Operand, const, expr_result_type, immed, obj,
                    temp)

FLAT = ("flat", 0)
INT64 = T(INT, 64)


def parse_alu(spec):
    """'flat', 'shared', 'shared2', 'shared(2)' or 'shared:2' to an (model, k) pair."""
    if isinstance(spec, tuple):
        return spec
    s = (spec or "flat").strip().lower()
    if s == "flat":
        return FLAT
    if s.startswith("shared"):
        rest = s[6:].strip("(): ")
        k = int(rest) if rest else 1
        if k < 1:
            raise ValueError("shared ALU count must be positive")
        return ("shared", k)
    raise ValueError(f"unknown ALU model '{spec}'")


def move(d, s):
    return Instr("move", (d, s))


def expr2(d, a, op, b):
    return Instr("expr", (d, a, op, b))


def expr1(d, op, a):
    return Instr("expr", (d, op, a))


def bind(n):
    return Instr("bind", (n,))


def jump(label):
    return Instr("jump", (label,))


def falsejump(c, label):
    return Instr("falsejump", (c, label))


def fun(o, method, *args):
    return Instr("fun", (o, method) + tuple(args))


def label(name):
    return Instr("label", (name,))


NOP = Instr("nop")


def map_operands(ins: Instr, fn):
    """Rebuild an instruction with fn applied to every operand (selectors included)."""
    def m(x):
        if not isinstance(x, Operand):
            return x
        if x.index is not None:
            x = dataclasses.replace(x, index=m(x.index))
        return fn(x)
    return Instr(ins.op, tuple(m(a) for a in ins.args))


class Chain:
    """Instructions computing one atomic step, plus steps that must run before it."""

    def __init__(self, shared):
        self.shared = shared
        self.pre = []  # earlier single-instruction steps (shared ALU, RAM prefetch)
        self.body = []
        self.live = set()  # immediates still to be read
        self.temps = set()  # temporaries never reused inside one chain

    def new_temp(self, depth):
        k = depth
        while k in self.temps:
            k += 1
        self.temps.add(k)
        return k


class Lowering:
    def __init__(self, tm, info, alu=FLAT, bind_source="explicit"):
        self.tm = tm
        self.info = info
        self.alu = parse_alu(alu)
        self.bind_source = bind_source
        self.n = 0
        self.code = []
        self.used = set()
        self.dispatch = [END]
        self.wait_reg = None
        self.wait_ty = None
        width = _max_wait(info.body)
        if width:
            self.wait_reg = "WAIT"
            self.wait_ty = T(LOGIC, width)

    @property
    def shared(self):
        return self.alu[0] == "shared"

    # -------------------------------------------------------------- symbols

    def sym(self, name):
        if name == self.wait_reg:
            return None
        s = self.tm.lookup(name, self.info)
        if s is None:
            raise InternalError(f"unknown object '{name}' in process {self.info.name}")
        return s

    def ref(self, name, ty=None, conv=None, index=None):
        self.used.add(name)
        if ty is None:
            ty = self.wait_ty if name == self.wait_reg else self.sym(name).type
        return obj(name, ty, conv, index)

    def is_ram(self, op):
        if op.kind != "obj" or op.name == self.wait_reg:
            return None
        s = self.tm.lookup(op.name, self.info)
        return s.block if s is not None and s.in_ram else None

    # ---------------------------------------------------------- expressions

    def leaf(self, e, ch, depth):
        """Operand for e when it needs no instruction of its own, else None."""
        if isinstance(e, A.Num):
            return const(e.value, e.ty)
        if isinstance(e, A.Name):
            return self.ref(e.id)
        if isinstance(e, A.Index):
            idx = e.index[0]
            if isinstance(idx, A.Num):
                iop = const(idx.value)
            else:
                iop = self.value(idx, ch, depth + 1)
            return self.ref(e.base.id, e.ty, index=iop)
        if isinstance(e, A.Conv):
            inner = self.value(e.operand, ch, depth)
            if inner.is_const:
                return const(convert(inner.value, inner.ty, e.ty), e.ty)
            if inner.conv is not None:
                inner = self.materialize(inner, ch, depth)
            return dataclasses.replace(inner, conv=e.ty)
        return None

    def slot(self, ch, depth, ty):
        """A free scratch operand: a temporary register (shared ALU) or an immediate."""
        if self.shared:
            return temp(ch.new_temp(depth), ty)
        k = depth
        while k in ch.live:
            k += 1
        return immed(k, ty)

    def materialize(self, op, ch, depth):
        d = self.slot(ch, depth, op.eff)
        self.put(ch, move(d, op), root=False)
        return d

    def put(self, ch, ins, root):
        if ch.shared and not root:
            ch.pre.append([ins])
        else:
            ch.body.append(ins)

    def value(self, e, ch, depth):
        op = self.leaf(e, ch, depth)
        if op is not None:
            return op
        return self.compute(e, self.slot(ch, depth, None), ch, depth, root=False)

    def compute(self, e, dst, ch, depth, root=True):
        """Emit instructions computing e into dst; returns dst with its type filled in."""
        if isinstance(e, A.Binary):
            a = self.value(e.left, ch, depth + 1)
            self._hold(ch, a)
            b = self.value(e.right, ch, depth + 1)
            self._release(ch, a)
            dst = self._typed_dst(dst, expr_result_type(e.op, a, b))
            self.put(ch, expr2(dst, a, e.op, b), root)
            return dst
        if isinstance(e, A.Unary):
            a = self.value(e.operand, ch, depth + 1)
            dst = self._typed_dst(dst, expr_result_type(e.op, a))
            self.put(ch, expr1(dst, e.op, a), root)
            return dst
        if isinstance(e, A.BitSel):
            return self.bitsel(e, dst, ch, depth, root)
        op = self.leaf(e, ch, depth)
        if op is None:
            raise InternalError(f"cannot lower expression {type(e).__name__}")
        dst = self._typed_dst(dst, op.eff)
        self.put(ch, move(dst, op), root)
        return dst

    @staticmethod
    def _hold(ch, op):
        ch.live = ch.live | _immeds(op)

    @staticmethod
    def _release(ch, op):
        ch.live = ch.live - _immeds(op)

    @staticmethod
    def _typed_dst(dst, ty):
        if dst.kind in ("immed", "temp") and dst.ty is None:
            return dataclasses.replace(dst, ty=ty)
        return dst

    def bitsel(self, e, dst, ch, depth, root):
        base = self.value(e.base, ch, depth + 1)
        bty = base.eff
        self._hold(ch, base)
        if e.lo is None:
            sh = self.value(e.hi, ch, depth + 1)
            mask = 1
        else:
            sh = const(e.lo.value, T(INT, e.lo.value.bit_length() + 1))
            mask = (1 << (e.hi.value - e.lo.value + 1)) - 1
        self._release(ch, base)
        shifted = base
        if not (sh.is_const and sh.value == 0):
            shifted = self.slot(ch, depth + 1, bty)
            self.put(ch, expr2(shifted, base, "lsr", sh), root=False)
        masked = self.slot(ch, depth + 1, bty)
        self.put(ch, expr2(masked, shifted, "land", const(mask, bty)), root=False)
        dst = self._typed_dst(dst, e.ty)
        self.put(ch, move(dst, dataclasses.replace(masked, conv=e.ty)), root)
        return dst

    # -------------------------------------------------------------- targets

    def target(self, t, ch):
        if isinstance(t, A.Name):
            return self.ref(t.id)
        if isinstance(t, A.Index):
            idx = t.index[0]
            if isinstance(idx, A.Num):
                iop = const(idx.value)
            else:
                iop = self.value(idx, ch, 2)
                self._hold(ch, iop)
            return self.ref(t.base.id, t.ty, index=iop)
        raise InternalError(f"unexpected assignment target {type(t).__name__}")

    def assign_into(self, a: A.Assign, ch):
        dst = self.target(a.target, ch)
        self.compute(a.value, dst, ch, 1)
        ch.live = set()

    def finish(self, ch):
        """Prefetch RAM reads so a step touches each RAM block at most once."""
        counts = {}
        for ins in ch.body:
            for op in _all_operands(ins):
                blk = self.is_ram(op)
                if blk:
                    counts[blk] = counts.get(blk, 0) + 1
        if all(c <= 1 for c in counts.values()):
            return
        body = []
        for ins in ch.body:
            def pre(op, ins=ins):
                blk = self.is_ram(op)
                if (blk and counts[blk] > 1 and ins.dst() is not op):
                    counts[blk] -= 1
                    t = temp(ch.new_temp(1), op.ty)
                    ch.pre.append([move(t, dataclasses.replace(op, conv=None))])
                    return dataclasses.replace(t, conv=op.conv)
                return op
            body.append(Instr(ins.op, tuple(_map_sources(ins, pre))))
        ch.body = body

    # ------------------------------------------------------------- emission

    def next(self):
        self.n += 1
        return self.n

    def lab(self, name):
        self.code.append(label(name))

    def step(self, instrs, extra=()):
        """Emit one state: a single instruction or a bind group."""
        instrs = list(instrs) + list(extra)
        if not instrs:
            return
        if len(instrs) > 1:
            self.code.append(bind(len(instrs)))
        self.code.extend(instrs)

    def chain(self, ch, extra=(), nop_in=False, nop_after=False):
        self.finish(ch)
        for s in ch.pre:
            self.step(s)
        body = list(ch.body) + list(extra)
        if nop_in and len(body) > 0:
            body.append(NOP)
        self.step(body)
        if nop_after:
            self.code.append(NOP)

    def new_chain(self):
        return Chain(self.shared)

    # ----------------------------------------------------------- statements

    def run(self) -> MProgram:
        info = self.info
        if info.exc_reg and info.escapes:
            # a callee clears its exception state on every activation
            n = self.next()
            self.lab(f"i{n}_assign")
            self.code.append(move(self.ref(info.exc_reg), const(0, self.sym(info.exc_reg).type)))
        self.stmts(info.body)
        prog = MProgram(info.name, self.imports(), self.data(), self.code)
        normalize_end(prog.code)
        return prog

    def stmts(self, ss):
        for s in ss:
            self.stmt(s)

    def block(self, b):
        if b is not None:
            self.stmts(b.stmts)

    def stmt(self, s):
        if isinstance(s, A.Assign):
            n = self.next()
            ch = self.new_chain()
            self.assign_into(s, ch)
            self.lab(f"i{n}_assign")
            single_move = len(ch.body) == 1 and ch.body[0].op == "move" and not ch.pre
            self.chain(ch, nop_after=not single_move)
            self.lab(f"i{n}_assign_end")
            self.code.append(NOP)
        elif isinstance(s, A.Bind):
            if self.bind_source != "explicit":
                self.stmts(s.stmts)
                return
            n = self.next()
            self.n += len(s.stmts) - 1
            ch = self.new_chain()
            for a in s.stmts:
                self.assign_into(a, ch)
            self.lab(f"i{n}_bind_to_{self.n}")
            self.chain(ch, nop_in=True)
            self.lab(f"i{n}_bind_to_{self.n}_end")
            self.code.append(NOP)
        elif isinstance(s, A.If):
            self.if_stmt(s)
        elif isinstance(s, A.Match):
            self.match(s)
        elif isinstance(s, A.For):
            self.for_loop(s)
        elif isinstance(s, A.While):
            n = self.next()
            top, end = f"i{n}_while_loop", f"i{n}_while_loop_end"
            self.lab(top)
            self.branch_on(s.cond, end)
            self.block(s.body)
            self.code.append(jump(top))
            self.lab(end)
            self.code.append(NOP)
        elif isinstance(s, A.Always):
            n = self.next()
            top = f"i{n}_always_loop"
            self.lab(top)
            self.block(s.body)
            self.code.append(jump(top))
            self.lab(f"i{n}_always_loop_end")
        elif isinstance(s, A.WaitFor):
            self.wait(s)
        elif isinstance(s, A.MethodCall):
            self.method(s)
        elif isinstance(s, A.FunCall):
            self.fun_call(s)
        elif isinstance(s, A.Raise):
            n = self.next()
            self.lab(f"i{n}_raise")
            reg = self.info.exc_reg
            self.code.append(move(self.ref(reg), const(self.tm.exceptions[s.name],
                                                       self.sym(reg).type)))
            self.code.append(jump(self.dispatch[-1]))
        elif isinstance(s, A.Try):
            self.try_stmt(s)
        elif isinstance(s, (A.Block,)):
            self.stmts(s.stmts)
        else:
            raise InternalError(f"cannot lower statement {type(s).__name__}")

    def branch_on(self, cond, target, extra=()):
        """One state testing cond; control moves to target when it is false."""
        ch = self.new_chain()
        if isinstance(cond, A.Name):
            c = self.ref(cond.id)
        else:
            c = self.compute(cond, immed(1, None), ch, 1)
        self.chain(ch, extra=list(extra) + [falsejump(c, target)])

    def if_stmt(self, s):
        n = self.next()
        end = f"i{n}_branch_end"
        other = f"i{n}_branch_else" if s.orelse is not None else end
        self.lab(f"i{n}_branch")
        self.branch_on(s.cond, other)
        self.block(s.then)
        if s.orelse is not None:
            self.code.append(jump(end))
            self.lab(other)
            self.block(s.orelse)
        self.lab(end)
        self.code.append(NOP)

    def match(self, s):
        n = self.next()
        end = f"i{n}_match_end"
        arms = s.arms
        self.lab(f"i{n}_match")
        for k, arm in enumerate(arms):
            last = k == len(arms) - 1
            nxt = end if last else f"i{n}_match_when_{k + 2}"
            if arm.values is not None:
                self.branch_on(_arm_cond(s.expr, arm.values), nxt)
            self.block(arm.body)
            if not last:
                self.code.append(jump(end))
                self.lab(nxt)
        self.lab(end)
        self.code.append(NOP)

    def for_loop(self, s):
        n = self.next()
        reg = s.reg
        ty = self.sym(reg).type
        loopv = A.Name(reg, ty=ty)
        self.lab(f"i{n}_for_loop")
        ch = self.new_chain()
        self.compute(s.start, self.ref(reg), ch, 1)
        self.chain(ch)
        cond_label, end = f"i{n}_for_loop_cond", f"i{n}_for_loop_end"
        self.lab(cond_label)
        if s.downto:
            cond = A.Binary(">=", loopv, s.stop, ty=T(BOOL))
        else:
            cond = A.Binary(">=", s.stop, loopv, ty=T(BOOL))
        self.branch_on(cond, end)
        self.block(s.body)
        self.lab(f"i{n}_for_loop_incr")
        step = 1 if s.step is None else s.step.value
        self.step([expr2(self.ref(reg), self.ref(reg), "-" if s.downto else "+", const(step, ty)),
                   NOP, jump(cond_label)])
        self.lab(end)

    def wait(self, s):
        n = self.next()
        what = s.what
        with_assigns = s.with_stmt.stmts if s.with_stmt is not None else []
        if isinstance(what, A.Num):
            count = what.value
            if count > 0:
                self.lab(f"i{n}_wait")
                ch = self.new_chain()
                for a in with_assigns:
                    self.assign_into(a, ch)
                w = self.ref(self.wait_reg)
                ch.body.append(move(w, const(max(count - 2, 0), self.wait_ty)))
                self.chain(ch)
                if count >= 2:
                    loop = f"i{n}_wait_loop"
                    self.lab(loop)
                    self.step([expr2(immed(1, T(BOOL)), w, "=", const(0, self.wait_ty)),
                               expr2(w, w, "-", const(1, self.wait_ty)),
                               falsejump(immed(1, T(BOOL)), loop)])
        else:
            loop = f"i{n}_wait"
            self.lab(loop)
            ch = self.new_chain()
            c = self.compute(what, immed(1, None), ch, 1)
            for a in with_assigns:
                self.assign_into(a, ch)
            self.chain(ch, extra=[falsejump(c, loop)])
        if s.else_stmt is not None and s.else_stmt.stmts:
            self.lab(f"i{n}_wait_end")
            ch = self.new_chain()
            for a in s.else_stmt.stmts:
                self.assign_into(a, ch)
            self.chain(ch)

    def method(self, s):
        n = self.next()
        self.lab(f"i{n}_fun")
        name = s.obj.id
        args = []
        for a in s.args:
            if isinstance(a, A.Num):
                args.append(const(a.value, INT64))
            else:
                ch = self.new_chain()
                op = self.target(a, ch)
                if ch.body or ch.pre:
                    raise InternalError("method result targets need a constant selector")
                args.append(op)
        self.used.add(name)
        self.code.append(fun(_objref(name), s.method, *args))
        if s.method == "call":
            callee = self.tm.process(name)
            if callee.escapes:
                self.exception_path(self.exception_check(callee.exc_reg, n), callee.exc_reg)

    def exception_check(self, reg, n):
        """Test a callee's exception register right after the call returned."""
        ch = self.new_chain()
        c = immed(1, T(BOOL))
        ch.body.append(expr2(c, self.ref(reg), "=", const(0, self.sym(reg).type)))
        bad = f"i{n}_exception"
        self.chain(ch, extra=[falsejump(c, bad)])
        return f"i{n}_exception_end", bad

    def exception_path(self, exc, reg, lock=None):
        """Copy a callee's exception into ours and continue at the innermost handler."""
        ok, bad = exc
        self.code.append(jump(ok))
        self.lab(bad)
        self.code.append(move(self.ref(self.info.exc_reg), self.ref(reg)))
        if lock is not None:
            self.code.append(fun(_objref(lock), "unlock"))
        self.code.append(jump(self.dispatch[-1]))
        self.lab(ok)
        self.code.append(NOP)

    def fun_call(self, s):
        fname = f"FUN_{s.func}"
        callee = self.tm.process(fname)
        lock = f"LOCK_{fname}"
        n = self.next()
        self.lab(f"i{n}_fun")
        self.used.add(lock)
        self.code.append(fun(_objref(lock), "lock"))
        if s.args:
            n = self.next()
            ch = self.new_chain()
            for a, reg in zip(s.args, callee.args):
                self.compute(a, self.ref(reg), ch, 1)
                ch.live = set()
            self.lab(f"i{n}_assign")
            self.chain(ch)
        n = self.next()
        self.lab(f"i{n}_fun")
        self.used.add(fname)
        self.code.append(fun(_objref(fname), "call"))
        exc = None
        if callee.escapes:
            exc = self.exception_check(callee.exc_reg, n)
        if s.targets:
            n = self.next()
            ch = self.new_chain()
            for t, reg in zip(s.targets, callee.rets):
                dst = self.target(t, ch)
                src = self.ref(reg)
                if src.ty != dst.ty:
                    src = dataclasses.replace(src, conv=dst.ty)
                ch.body.append(move(dst, src))
            self.lab(f"i{n}_assign")
            self.chain(ch)
        n = self.next()
        self.lab(f"i{n}_fun")
        self.code.append(fun(_objref(lock), "unlock"))
        if exc is not None:
            self.exception_path(exc, callee.exc_reg, lock)

    def try_stmt(self, s):
        n = self.next()
        handler = f"i{n}_try_handler"
        end = f"i{n}_try_end"
        reg = self.info.exc_reg
        rty = self.sym(reg).type
        self.lab(f"i{n}_try")
        self.dispatch.append(handler)
        self.block(s.body)
        self.dispatch.pop()
        self.code.append(jump(end))
        self.lab(handler)
        for k, h in enumerate(s.handlers):
            nxt = f"i{n}_try_handler_{k + 2}"
            if h.names is not None:
                cond = None
                for name in h.names:
                    t = A.Binary("=", A.Name(reg, ty=rty),
                                 A.Num(self.tm.exceptions[name], ty=rty), ty=T(BOOL))
                    cond = t if cond is None else A.Binary("or", cond, t, ty=T(BOOL))
                self.branch_on(cond, nxt)
            self.code.append(move(self.ref(reg), const(0, rty)))
            self.block(h.body)
            self.code.append(jump(end))
            self.lab(nxt)
            if h.names is None:
                break
        else:
            # no handler matched: hand the exception to the enclosing scope
            self.code.append(jump(self.dispatch[-1]))
        self.lab(end)
        self.code.append(NOP)

    # ------------------------------------------------------------- segments

    def imports(self):
        out = []
        for name, sym in self.tm.symbols.items():
            if name in self.used and name not in self.info.locals:
                out.append(decl_of(sym))
        return out

    def data(self):
        syms = [s for s in self.info.locals.values() if s.kind in STORAGE or s.kind == "array"]
        # loop registers first, as in the listings
        syms.sort(key=lambda s: s.role != "loop")
        out = [decl_of(s) for s in syms]
        if self.wait_reg:
            out.append(Decl("register", self.wait_reg, self.wait_ty))
        return out


def _immeds(op):
    out = set()
    while op is not None:
        if op.kind == "immed":
            out.add(op.value)
        op = op.index
    return out


def _objref(name):
    return Operand("obj", name)


def decl_of(sym):
    k = sym.kind
    if k in STORAGE:
        return Decl({"reg": "register", "var": "variable", "sig": "signal"}[k], sym.name, sym.type)
    if k == "array":
        kind = {"reg": "register", "var": "variable", "sig": "signal"}[sym.elem_kind]
        return Decl("array", sym.name, sym.type, sym.size, kind)
    if k in ("queue", "channel"):
        return Decl(k, sym.name, sym.type)
    if k == "process":
        return Decl("process", sym.name)
    return Decl("object", sym.name, detail=k)


def _all_operands(ins):
    out = []
    for op in ins.operands():
        while op is not None:
            out.append(op)
            op = op.index
    return out


def _map_sources(ins, fn):
    """Args of ins with fn applied to every read operand (the destination itself is kept)."""
    def m(x, is_dst=False):
        if not isinstance(x, Operand):
            return x
        if x.index is not None:
            x = dataclasses.replace(x, index=m(x.index))
        return x if is_dst else fn(x)
    if ins.op in ("move", "expr"):
        return (m(ins.args[0], True),) + tuple(m(a) for a in ins.args[1:])
    return tuple(m(a) for a in ins.args)


def _arm_cond(sel, values):
    cond = None
    for v in values:
        if isinstance(v, tuple):
            lo, hi = sorted((v[0], v[1]), key=lambda x: x.value)
            t = A.Binary("and", A.Binary(">=", sel, lo, ty=T(BOOL)),
                         A.Binary("<=", sel, hi, ty=T(BOOL)), ty=T(BOOL))
        else:
            t = A.Binary("=", sel, v, ty=T(BOOL))
        cond = t if cond is None else A.Binary("or", cond, t, ty=T(BOOL))
    return cond


def _max_wait(stmts):
    width = 0
    for s in stmts:
        for n in s.walk():
            if isinstance(n, A.WaitFor) and isinstance(n.what, A.Num) and n.what.value > 0:
                width = max(width, (n.what.value - 1).bit_length() + 1)
    return width


def label_positions(code):
    """Map label -> index of the next non-label instruction (len(code) at the end)."""
    pos = {}
    pending = []
    for i, ins in enumerate(code):
        if ins.op == "label":
            pending.append(ins.args[0])
        else:
            for lb in pending:
                pos[lb] = i
            pending = []
    for lb in pending:
        pos[lb] = len(code)
    return pos


def normalize_end(code):
    """Point jumps at labels that sit at the very end to the %END pseudo-target."""
    pos = label_positions(code)
    end = len(code)
    for i, ins in enumerate(code):
        t = ins.target
        if t is not None and t != END and pos.get(t) == end:
            code[i] = Instr(ins.op, ins.args[:-1] + (END,))
    return code


def lower_process(tm, proc, alu=FLAT, bind_source="explicit") -> MProgram:
    """Lower one process (a name or ProcessInfo) of a typed module to microcode."""
    info = tm.process(proc) if isinstance(proc, str) else proc
    return Lowering(tm, info, alu, bind_source).run()


def lower_module(tm, alu=FLAT, bind_source="explicit"):
    return {p.name: lower_process(tm, p, alu, bind_source) for p in tm.processes}
