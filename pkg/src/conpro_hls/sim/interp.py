"""Big-step evaluation of a typed process body, independent of the cycle model."""
from __future__ import annotations

import random as _random

from ..frontend import ast as A
from ..sema.types import BOOL, binop, bits, convert, unop, wrap


class InterpError(Exception):
    """The body uses something a sequential evaluation cannot model (e.g. a guarded object)."""


class StepLimit(InterpError):
    pass


class Raised(Exception):
    def __init__(self, name):
        super().__init__(name)
        self.name = name


class Store(dict):
    """Final values by object name; `raised` names an exception that escaped the body."""
    raised = None


class RandomSource:
    """Value source of a random object: a seeded generator or a fixed, repeating sequence."""

    def __init__(self, width=8, seed=0, sequence=None):
        self.width = width
        self.sequence = list(sequence) if sequence is not None else None
        self.pos = 0
        self.rng = _random.Random(seed)

    def seed(self, s):
        self.rng = _random.Random(s)

    def next(self):
        if self.sequence:
            v = self.sequence[self.pos % len(self.sequence)]
            self.pos += 1
            return v & ((1 << self.width) - 1)
        return self.rng.getrandbits(self.width)


def random_sources(tm, overrides=None):
    overrides = overrides or {}
    out = {}
    for name, sym in tm.symbols.items():
        if sym.kind == "random":
            out[name] = RandomSource(sym.params.get("datawidth", 8), sym.params.get("seed", 0),
                                     overrides.get(name))
    for call in tm.config:
        if call.method == "seed" and call.obj.id in out and call.args:
            out[call.obj.id].seed(call.args[0])
    return out


def read_index(cells, i):
    """Out-of-range reads yield 0 and out-of-range writes are dropped."""
    return cells[i] if 0 <= i < len(cells) else 0


class AstInterpreter:
    def __init__(self, tm=None, proc=None, store=None, max_steps=1_000_000, random_values=None):
        self.tm = tm
        self.max_steps = max_steps
        self.steps = 0
        self.globals = {}
        self.frames = []
        self.randoms = random_sources(tm, random_values) if tm is not None else {}
        self.info = tm.process(proc) if tm is not None and proc is not None else None
        frame = {}
        for k, v in (store or {}).items():
            self.target_dict(k, frame)[k] = list(v) if isinstance(v, list) else v
        self.frames.append((self.info, frame))

    # ------------------------------------------------------------- storage

    def target_dict(self, name, frame=None):
        info, local = self.frames[-1] if frame is None else (self.info, frame)
        if self.tm is None:
            return local
        if info is not None and name in info.locals:
            return local
        if self.tm.symbols.get(name) is not None:
            return self.globals
        return local

    def sym(self, name):
        if self.tm is None:
            return None
        info = self.frames[-1][0]
        return self.tm.lookup(name, info) if info is not None else self.tm.symbols.get(name)

    def cells(self, name):
        d = self.target_dict(name)
        if name not in d:
            sym = self.sym(name)
            size = sym.size if sym is not None else 0
            d[name] = [0] * size
        return d[name]

    def load(self, name):
        return self.target_dict(name).get(name, 0)

    # ---------------------------------------------------------- expressions

    def eval(self, e):
        if isinstance(e, A.Num):
            return e.value
        if isinstance(e, A.Name):
            sym = self.sym(e.id)
            if sym is not None and sym.kind in ("queue", "channel"):
                raise InterpError(f"'{e.id}' is a {sym.kind}; sequential evaluation cannot block")
            return self.load(e.id)
        if isinstance(e, A.Index):
            return read_index(self.cells(e.base.id), self.eval(e.index[0]))
        if isinstance(e, A.BitSel):
            v = bits(self.eval(e.base), e.base.ty)
            hi = self.eval(e.hi)
            lo = hi if e.lo is None else self.eval(e.lo)
            if hi >= e.base.ty.width or lo < 0:
                return 0
            return (v >> lo) & ((1 << (hi - lo + 1)) - 1)
        if isinstance(e, A.Unary):
            return unop(e.op, self.eval(e.operand), e.operand.ty)
        if isinstance(e, A.Binary):
            if e.op in ("and", "or") and e.left.ty.base == BOOL:
                return binop(e.op, self.eval(e.left), self.eval(e.right), e.left.ty)
            return binop(e.op, self.eval(e.left), self.eval(e.right), e.left.ty, e.right.ty)
        if isinstance(e, A.Conv):
            return convert(self.eval(e.operand), e.operand.ty, e.ty)
        raise InterpError(f"cannot evaluate {type(e).__name__}")

    def store_to(self, target, value, ty):
        value = wrap(value, target.ty) if ty is None else convert(value, ty, target.ty)
        if isinstance(target, A.Name):
            sym = self.sym(target.id)
            if sym is not None and sym.kind in ("queue", "channel"):
                raise InterpError(f"'{target.id}' is a {sym.kind}; sequential evaluation cannot block")
            self.target_dict(target.id)[target.id] = value
        elif isinstance(target, A.Index):
            cells = self.cells(target.base.id)
            i = self.eval(target.index[0])
            if 0 <= i < len(cells):
                cells[i] = value
        else:
            raise InterpError("unexpected assignment target")

    # ----------------------------------------------------------- statements

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit(f"more than {self.max_steps} statements executed")

    def run(self, stmts):
        for s in stmts:
            self.exec(s)

    def exec(self, s):
        self.tick()
        if isinstance(s, A.Assign):
            self.store_to(s.target, self.eval(s.value), s.value.ty)
        elif isinstance(s, A.Bind):
            self.parallel(s.stmts)
        elif isinstance(s, A.Block):
            self.run(s.stmts)
        elif isinstance(s, A.If):
            if self.eval(s.cond):
                self.run(s.then.stmts)
            elif s.orelse is not None:
                self.run(s.orelse.stmts)
        elif isinstance(s, A.Match):
            v = self.eval(s.expr)
            for arm in s.arms:
                if arm.values is None or any(self.arm_hit(x, v) for x in arm.values):
                    self.run(arm.body.stmts)
                    break
        elif isinstance(s, A.For):
            self.for_loop(s)
        elif isinstance(s, A.While):
            while self.eval(s.cond):
                self.tick()
                self.run(s.body.stmts)
        elif isinstance(s, A.Always):
            while True:
                self.tick()
                self.run(s.body.stmts)
        elif isinstance(s, A.WaitFor):
            self.wait(s)
        elif isinstance(s, A.Raise):
            raise Raised(s.name)
        elif isinstance(s, A.Try):
            self.try_stmt(s)
        elif isinstance(s, A.FunCall):
            self.fun_call(s)
        elif isinstance(s, A.MethodCall):
            self.method(s)
        else:
            raise InterpError(f"cannot execute {type(s).__name__}")

    def arm_hit(self, x, v):
        if isinstance(x, tuple):
            lo, hi = sorted((x[0].value, x[1].value))
            return lo <= v <= hi
        return x.value == v

    def parallel(self, stmts):
        values = [(a.target, self.eval(a.value), a.value.ty,
                   self.eval(a.target.index[0]) if isinstance(a.target, A.Index) else None)
                  for a in stmts]
        for target, v, ty, idx in values:
            if idx is not None:
                target = A.Index(target.base, [A.Num(idx)], ty=target.ty)
            self.store_to(target, v, ty)

    def for_loop(self, s):
        ty = s.start.ty
        step = 1 if s.step is None else s.step.value
        self.store_to(A.Name(s.reg, ty=ty), self.eval(s.start), ty)
        while True:
            i, stop = self.load(s.reg), self.eval(s.stop)
            if (i < stop) if s.downto else (i > stop):
                break
            self.tick()
            self.run(s.body.stmts)
            i = self.load(s.reg)
            self.store_to(A.Name(s.reg, ty=ty), i - step if s.downto else i + step, ty)

    def wait(self, s):
        if s.what.ty.base == BOOL:
            while True:
                self.tick()
                c = self.eval(s.what)
                if s.with_stmt is not None:
                    self.parallel(s.with_stmt.stmts)
                if c:
                    break
        elif s.with_stmt is not None and s.what.value > 0:
            self.parallel(s.with_stmt.stmts)
        if s.else_stmt is not None:
            self.parallel(s.else_stmt.stmts)

    def try_stmt(self, s):
        try:
            self.run(s.body.stmts)
        except Raised as exc:
            for h in s.handlers:
                if h.names is None or exc.name in h.names:
                    self.run(h.body.stmts)
                    return
            raise

    def fun_call(self, s):
        if self.tm is None:
            raise InterpError("shared function calls need the typed module")
        info = self.tm.process(f"FUN_{s.func}")
        args = [(self.eval(a), a.ty) for a in s.args]
        self.frames.append((info, {}))
        try:
            for (v, ty), reg in zip(args, info.args):
                sym = self.tm.symbols[reg]
                self.store_to(A.Name(reg, ty=sym.type), v, ty)
            self.run(info.body)
        finally:
            self.frames.pop()
        for t, reg in zip(s.targets, info.rets):
            self.store_to(t, self.globals.get(reg, 0), self.tm.symbols[reg].type)

    def method(self, s):
        sym = self.sym(s.obj.id)
        if sym is not None and sym.kind == "random":
            src = self.randoms[s.obj.id]
            if s.method == "read":
                t = s.args[0]
                self.store_to(t, src.next(), _rand_type(src.width))
                return
            if s.method == "seed":
                src.seed(s.args[0].value)
                return
            if s.method == "init":
                return
        raise InterpError(f"method '{s.method}' of '{s.obj.id}' needs the cycle simulator")

    def result(self):
        out = Store(self.globals)
        out.update(self.frames[0][1])
        return out


def _rand_type(width):
    from ..sema.types import LOGIC, T
    return T(LOGIC, width)


def interpret_ast(body, store=None, tm=None, proc=None, max_steps=1_000_000,
                  random_values=None) -> Store:
    """Run a typed statement list sequentially and return the final store.

    An exception escaping the body is reported in ``result.raised``.
    """
    it = AstInterpreter(tm, proc, store, max_steps, random_values)
    try:
        it.run(body)
    except Raised as exc:
        res = it.result()
        res.raised = exc.name
        return res
    return it.result()
