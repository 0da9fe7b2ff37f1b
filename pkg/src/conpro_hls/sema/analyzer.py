"""Name resolution, typing and structural rewriting of a parsed module."""
from __future__ import annotations

import copy

from ..diagnostics import CompileError, Diagnostic, DiagnosticSink
from ..frontend import ast as A
from ..frontend.lexer import FREQ_UNITS, TIME_UNITS
from .symbols import ABSTRACT, METHODS, STORAGE, ProcessInfo, Symbol, TypedModule
from .types import (BIT_OPS, BOOL, BOOL_OPS, CHAR, INT, LOGIC, MAX_WIDTH, REL_OPS, SHIFT_OPS,
                    T, signed_bits_needed)

DEFAULT_CLOCK_HZ = 1_000_000
MIN_LOOP_WIDTH = 8
DEFAULT_INT_WIDTH = 32
MAX_QUEUE_DEPTH = 256
BOOLT = T(BOOL)
CONV_BASE = {"to_int": INT, "to_logic": LOGIC, "to_char": CHAR, "to_bool": BOOL}


class _NotConst(Exception):
    pass


def ilog_ceil(v, base):
    """Smallest k with base**k >= v, i.e. ceil(log_base v)."""
    if base < 2 or v < 1:
        raise ValueError("log needs base >= 2 and value >= 1")
    k, p = 0, 1
    while p < v:
        p *= base
        k += 1
    return k


def _tdiv(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _kind_of(ty):
    return {INT: "int", LOGIC: "logic", BOOL: "bool", CHAR: "char"}[ty.base]


def typed_num(value, ty, loc=None):
    n = A.Num(value, _kind_of(ty), ty.width if ty.base == LOGIC else None)
    if loc is not None:
        n.loc = loc
    n.ty = ty
    return n


def param_dict(params, convert):
    out = {}
    for p in params:
        key = p.name.rsplit(".", 1)[-1]
        out[key] = True if p.value is None else convert(p.value)
    return out


class Analyzer:
    def __init__(self, module: A.Module):
        self.m = module
        self.sink = DiagnosticSink()
        self.globals: dict[str, Symbol] = {}
        self.types: dict[str, A.TypeDef] = {}
        self.functions: dict[str, A.FunctionDef] = {}
        self.shared: dict[str, ProcessInfo] = {}
        self.procs: list[ProcessInfo] = []
        self.exceptions: dict[str, int] = {}
        self.config: list = []
        self.clock_hz = DEFAULT_CLOCK_HZ
        self.cur: ProcessInfo | None = None
        self.loopvars: list[dict] = []
        self.renames: dict[str, str] = {}
        self.counters: dict = {}
        self.inline_stack: list[str] = []

    # ------------------------------------------------------------ diagnostics

    def err(self, msg, node=None):
        loc = getattr(node, "loc", None) or A.Loc()
        self.sink.error(msg, loc)
        raise CompileError(self.sink.items)

    # ---------------------------------------------------------------- driver

    def run(self) -> TypedModule:
        order = []
        exports = []
        tops = []
        for d in self.m.decls:
            if isinstance(d, A.Open):
                continue
            if isinstance(d, A.Export):
                exports.append(d)
            elif isinstance(d, A.TypeDef):
                self.declare_type(d)
            elif isinstance(d, A.ExceptionDef):
                for n in d.names:
                    if n in self.exceptions:
                        self.err(f"exception '{n}' defined twice", d)
                    self.exceptions[n] = len(self.exceptions) + 1
            elif isinstance(d, (A.ObjDef, A.AbstractDef, A.ArrayDef, A.ComponentDef)):
                self.declare(d, self.globals, "global")
            elif isinstance(d, A.FunctionDef):
                if d.name in self.functions or d.name in self.globals:
                    self.err(f"'{d.name}' defined twice", d)
                self.functions[d.name] = d
                if not A.param_value(d.params, "inline"):
                    order.append(d)
            elif isinstance(d, A.ProcessDef):
                order.append(d)
            elif isinstance(d, A.TopStmt):
                tops.append(d)
        for e in exports:
            for n in e.names:
                sym = self.globals.get(n)
                if sym is None:
                    self.err(f"undefined symbol '{n}' in export", e)
                sym.exported = True
        self.check_recursion()
        self.declare_processes(order)
        for t in tops:
            self.top_stmt(t.stmt, {})
        for d in order:
            if isinstance(d, A.FunctionDef):
                self.analyze_function(d)
            elif d.size is None:
                self.analyze_process(d, d.name, d.body)
            else:
                for i in range(self.globals[d.name].size):
                    body = A.map_exprs(d.body, lambda e, i=i: (
                        A.Num(i, loc=e.loc) if isinstance(e, A.SelfIndex) else None))
                    decls = A.map_exprs(d.decls, lambda e, i=i: (
                        A.Num(i, loc=e.loc) if isinstance(e, A.SelfIndex) else None))
                    self.analyze_process(d, f"{d.name}_{i}", body, decls, d.name, i)
        names = [p.name for p in self.procs]
        if "main" not in names:
            self.err("module has no process named 'main'", self.m)
        tm = TypedModule(self.m.name, self.globals, self.procs, dict(self.exceptions),
                         self.clock_hz, self.config, inline_functions={
                             k: v for k, v in self.functions.items() if k not in self.shared})
        self.layout_ram(tm)
        assign_exception_registers(tm)
        tm.accesses = collect_accesses(tm)
        self.check_signals(tm)
        for sym in tm.symbols.values():
            if sym.kind == "barrier":
                sym.params["N"] = len(tm.accessors(sym.name))
        tm.notes = [d for d in self.sink.items if d.severity != "error"]
        return tm

    # ---------------------------------------------------------- declarations

    def declare_type(self, d: A.TypeDef):
        if d.name in self.types:
            self.err(f"type '{d.name}' defined twice", d)
        self.types[d.name] = d
        if d.kind == "enum":
            for k, item in enumerate(d.items, start=1):
                self.globals[item] = Symbol(item, "const", value=k, role="enum", loc=d.loc)

    def const_int(self, e, what="value"):
        try:
            v, _ = self.const_value(e, tilde=True)
        except _NotConst:
            self.err(f"{what} must be a compile-time constant", e)
        return v

    def resolve_type(self, tref: A.TypeRef, allow_value=False):
        name = tref.name
        width = None if tref.width is None else self.const_int(tref.width, "type width")
        if width is not None and not 1 <= width <= MAX_WIDTH:
            self.err(f"width {width} outside 1..{MAX_WIDTH}", tref)
        if name == "int":
            return T(INT, width or DEFAULT_INT_WIDTH)
        if name == "logic":
            return T(LOGIC, width or 1)
        if name == "bool":
            return T(BOOL)
        if name == "char":
            return T(CHAR)
        if name == "value":
            if not allow_value:
                self.err("type 'value' is only allowed for constants", tref)
            return None
        td = self.types.get(name)
        if td is None:
            self.err(f"undefined type '{name}'", tref)
        return td

    def bit_layout(self, td: A.TypeDef):
        layout, pos = {}, 0
        for f in td.items:
            if isinstance(f.width, tuple):
                hi, lo, down = f.width
                hi, lo = self.const_int(hi), self.const_int(lo)
                if not down:
                    hi, lo = lo, hi
                hi, lo = max(hi, lo), min(hi, lo)
            else:
                w = self.const_int(f.width)
                lo, hi = pos, pos + w - 1
            layout[f.name] = (hi, lo)
            pos = max(pos, hi + 1)
        return layout, pos

    def data_type_of(self, tref, node):
        """DataType for tref, plus an optional struct/bit layout marker."""
        ty = self.resolve_type(tref)
        if isinstance(ty, A.TypeDef):
            if ty.kind == "enum":
                return T(LOGIC, max(1, len(ty.items).bit_length())), None
            if ty.kind == "bits":
                layout, width = self.bit_layout(ty)
                return T(LOGIC, width), ("bits", layout)
            if ty.kind == "struct":
                return None, ("struct", ty)
            self.err(f"type '{tref.name}' cannot type a data object", node)
        return ty, None

    def obj_params(self, params):
        def conv(v):
            if isinstance(v, A.Str):
                return v.value
            if isinstance(v, A.Name):
                return v.id
            if isinstance(v, A.TimeValue):
                return self.cycles(v)
            return self.const_int(v, "parameter")
        return param_dict(params, conv)

    def add(self, table, sym, node):
        if sym.name in table:
            self.err(f"'{sym.name}' defined twice", node)
        table[sym.name] = sym
        return sym

    def declare(self, d, table, scope):
        owner = self.cur.name if self.cur else None
        if isinstance(d, A.ObjDef):
            params = self.obj_params(d.params)
            for n in d.names:
                if d.kind == "const":
                    ty = self.resolve_type(d.type, allow_value=True)
                    if isinstance(ty, A.TypeDef):
                        self.err("constants need a basic type", d)
                    v = self.const_int(d.init, "constant initializer")
                    if ty is not None and not ty.fits(v):
                        self.err(f"constant {v} does not fit in {ty}", d)
                    self.add(table, Symbol(n, "const", ty, scope, owner, value=v, loc=d.loc), d)
                elif d.kind == "block":
                    if scope != "global":
                        self.err("RAM blocks must be declared at module level", d)
                    self.add(table, Symbol(n, "ram-block", None, scope, params=params,
                                           loc=d.loc), d)
                elif d.kind in ("queue", "channel"):
                    if scope != "global":
                        self.err(f"{d.kind}s must be declared at module level", d)
                    ty, extra = self.data_type_of(d.type, d)
                    if extra and extra[0] == "struct":
                        self.err(f"{d.kind}s of struct type are not supported", d)
                    self.add(table, self.queue_symbol(n, d.kind, ty, params, d), d)
                else:
                    self.declare_storage(table, scope, owner, n, d.kind, d.type, d.block, params,
                                         d, dims=None)
        elif isinstance(d, A.AbstractDef):
            if scope != "global":
                self.err("abstract objects must be declared at module level", d)
            kind = d.otype.rsplit(".", 1)[-1].lower()
            params = self.obj_params(d.params)
            for n in d.names:
                self.add(table, Symbol(n, kind if kind in ABSTRACT else "device", None, scope,
                                       params=params, loc=d.loc), d)
        elif isinstance(d, A.ArrayDef):
            dims = tuple(self.const_int(x, "array size") for x in d.dims)
            if any(x < 1 for x in dims):
                self.err("array sizes must be positive", d)
            params = self.obj_params(d.params)
            size = 1
            for x in dims:
                size *= x
            for n in d.names:
                if d.kind == "object":
                    if scope != "global":
                        self.err("object arrays must be declared at module level", d)
                    kind = d.otype.rsplit(".", 1)[-1].lower()
                    kind = kind if kind in ABSTRACT else "device"
                    elems = []
                    for i in range(size):
                        en = f"{n}_{i}"
                        self.add(table, Symbol(en, kind, None, scope, params=dict(params),
                                               loc=d.loc), d)
                        elems.append(en)
                    self.add(table, Symbol(n, "object-array", None, scope, size=size, dims=dims,
                                           elem_kind=kind, elements=elems, loc=d.loc), d)
                elif d.kind in ("queue", "channel"):
                    if scope != "global":
                        self.err(f"{d.kind}s must be declared at module level", d)
                    ty, _ = self.data_type_of(d.type, d)
                    elems = []
                    for i in range(size):
                        sym = self.queue_symbol(f"{n}_{i}", d.kind, ty, dict(params), d)
                        self.add(table, sym, d)
                        elems.append(sym.name)
                    self.add(table, Symbol(n, "object-array", None, scope, size=size, dims=dims,
                                           elem_kind=d.kind, elements=elems, loc=d.loc), d)
                else:
                    self.declare_storage(table, scope, owner, n, d.kind, d.type, d.block, params,
                                         d, dims=dims)
        elif isinstance(d, A.ComponentDef):
            for n in d.names:
                self.add(table, Symbol(n, "component", None, scope, loc=d.loc), d)
        elif isinstance(d, A.TypeDef):
            self.err("type definitions must be at module level", d)
        else:
            self.err("unexpected declaration", d)

    def queue_symbol(self, name, kind, ty, params, node):
        depth = params.get("depth", 8 if kind == "queue" else 1)
        if not isinstance(depth, int) or not 1 <= depth <= MAX_QUEUE_DEPTH:
            self.err(f"{kind} depth must be within 1..{MAX_QUEUE_DEPTH}", node)
        params["depth"] = depth
        if kind == "channel":
            model = params.get("model", "buffered")
            if model not in ("buffered", "unbuffered"):
                self.err("channel model must be buffered or unbuffered", node)
            params["model"] = model
        return Symbol(name, kind, ty, "global", params=params, loc=node.loc)

    def declare_storage(self, table, scope, owner, name, kind, tref, block, params, node, dims):
        ty, extra = self.data_type_of(tref, node)
        size = 1
        for x in dims or ():
            size *= x
        if extra and extra[0] == "struct":
            fields = {}
            for f in extra[1].items:
                sub = f"{name}_{f.name}"
                fields[f.name] = sub
                self.declare_storage(table, scope, owner, sub, kind, f.type, block, params, node,
                                     dims)
            self.add(table, Symbol(name, "struct", None, scope, owner, params={"fields": fields},
                                   dims=dims or (), loc=node.loc), node)
            return
        if kind == "var" and block is None:
            block = "default_ram" if scope == "global" else f"{owner}_ram"
        if block is not None and kind != "var":
            self.err("only var objects can be placed in a RAM block", node)
        sym = Symbol(name, "array" if dims else kind, ty, scope, owner, params=dict(params),
                     block=block, size=size, dims=dims or (), elem_kind=kind if dims else None,
                     loc=node.loc)
        if extra and extra[0] == "bits":
            sym.params["bits"] = extra[1]
        self.add(table, sym, node)

    def declare_processes(self, order):
        for d in order:
            if isinstance(d, A.FunctionDef):
                self.declare_shared_function(d)
            elif d.size is None:
                self.add(self.globals, Symbol(d.name, "process", loc=d.loc), d)
            else:
                n = self.const_int(d.size, "process array size")
                if n < 1:
                    self.err("process array size must be positive", d)
                elems = [f"{d.name}_{i}" for i in range(n)]
                for e in elems:
                    self.add(self.globals, Symbol(e, "process", loc=d.loc), d)
                self.add(self.globals, Symbol(d.name, "process-array", size=n, dims=(n,),
                                              elem_kind="process", elements=elems, loc=d.loc), d)

    def declare_shared_function(self, d: A.FunctionDef):
        pname = f"FUN_{d.name}"
        args, rets = [], []
        for formal, role, out in [(f, "arg", args) for f in d.args] + [
                (f, "ret", rets) for f in d.rets]:
            if formal.type is None:
                self.err(f"parameter '{formal.name}' of shared function '{d.name}' needs a type", d)
            ty, extra = self.data_type_of(formal.type, d)
            if extra is not None and extra[0] == "struct":
                self.err("struct-typed function parameters are not supported", d)
            reg = f"{pname}_{formal.name}"
            self.add(self.globals, Symbol(reg, "reg", ty, "global", pname, role=role, loc=d.loc), d)
            out.append(reg)
        self.add(self.globals, Symbol(f"LOCK_{pname}", "mutex", None, "global", pname,
                                      role="lock", loc=d.loc), d)
        self.add(self.globals, Symbol(pname, "process", None, "global", role="function",
                                      loc=d.loc), d)
        self.shared[d.name] = ProcessInfo(pname, [], kind="function", func=d.name, args=args,
                                          rets=rets, params=self.obj_params(d.params), loc=d.loc)

    def check_recursion(self):
        graph = {}
        for name, f in self.functions.items():
            calls = set()
            for s in f.body:
                for n in s.walk():
                    if isinstance(n, A.Call) and n.func in self.functions:
                        calls.add(n.func)
                    if isinstance(n, A.ProcCall) and n.name in self.functions:
                        calls.add(n.name)
            graph[name] = calls
        state = {}

        def visit(n, path):
            state[n] = 1
            for m in sorted(graph[n]):
                if state.get(m) == 1:
                    cycle = " -> ".join(path[path.index(m):] + [m]) if m in path else m
                    self.err(f"recursive function call: {cycle}", self.functions[m])
                if m not in state:
                    visit(m, path + [m])
            state[n] = 2

        for n in graph:
            if n not in state:
                visit(n, [n])

    # -------------------------------------------------------- top level code

    def top_stmt(self, s, env):
        if isinstance(s, A.For):
            a = self.const_int(s.start, "top-level loop bound")
            b = self.const_int(s.stop, "top-level loop bound")
            step = 1 if s.step is None else self.const_int(s.step, "loop step")
            values = range(a, b - 1, -step) if s.downto else range(a, b + 1, step)
            for v in values:
                body = A.map_exprs(s.body, lambda e, v=v: (
                    A.Num(v, loc=e.loc) if isinstance(e, A.Name) and e.id == s.var else None))
                self.top_stmt(body, env)
            return
        if isinstance(s, A.Block):
            for x in s.stmts:
                self.top_stmt(x, env)
            return
        if not isinstance(s, A.MethodCall):
            self.err("only configuration method calls and for-loops are allowed at module level", s)
        sym = self.resolve_object(s.obj)
        args = []
        for a in s.args:
            if isinstance(a, A.TimeValue):
                if a.unit in FREQ_UNITS:
                    args.append(self.const_int(a.amount) * FREQ_UNITS[a.unit])
                else:
                    args.append(self.cycles(a))
            elif isinstance(a, A.Str):
                args.append(a.value)
            else:
                try:
                    args.append(self.const_value(a)[0])
                except _NotConst:
                    args.append(A.map_exprs(a, lambda e: None))
        if sym.kind == "system" and s.method == "clock" and args:
            if not isinstance(args[0], int) or args[0] <= 0:
                self.err("clock frequency must be a positive constant", s)
            self.clock_hz = args[0]
        self.config.append(A.MethodCall(A.Name(sym.name), s.method, args, loc=s.loc))

    def cycles(self, tv: A.TimeValue):
        amount = self.const_int(tv.amount, "time value")
        if tv.unit in FREQ_UNITS:
            self.err("a frequency is not a time interval", tv)
        return max(0, round(amount * TIME_UNITS[tv.unit] * self.clock_hz))

    # ---------------------------------------------------------------- bodies

    def analyze_process(self, d, name, body, decls=None, template=None, index=None):
        info = ProcessInfo(name, [], params=self.obj_params(d.params), template=template,
                           index=index, loc=d.loc)
        self.cur = info
        self.counters = {}
        for x in (d.decls if decls is None else decls):
            self.declare(x, info.locals, "local")
        info.body = self.stmts(body)
        self.procs.append(info)
        self.cur = None

    def analyze_function(self, d: A.FunctionDef):
        info = self.shared[d.name]
        self.cur = info
        self.counters = {}
        self.renames = {f.name: r for f, r in zip(d.args + d.rets, info.args + info.rets)}
        for x in d.decls:
            self.declare(x, info.locals, "local")
        info.body = self.stmts(d.body)
        self.renames = {}
        self.procs.append(info)
        self.cur = None

    def counter(self, key):
        k = self.counters.get(key, 0)
        self.counters[key] = k + 1
        return k

    def new_local(self, name, kind, ty, role):
        sym = Symbol(name, kind, ty, "local", self.cur.name, role=role)
        self.cur.locals[name] = sym
        return sym

    # ------------------------------------------------------------ name lookup

    def loopvar(self, name):
        for frame in reversed(self.loopvars):
            if name in frame:
                return frame[name]
        return None

    def lookup(self, name):
        if name in self.renames:
            return self.globals[self.renames[name]]
        if self.cur is not None and name in self.cur.locals:
            return self.cur.locals[name]
        return self.globals.get(name)

    def resolve_object(self, e):
        if isinstance(e, A.Name):
            sym = self.lookup(e.id)
            if sym is None:
                self.err(f"undefined object '{e.id}'", e)
            return sym
        if isinstance(e, A.Index) and isinstance(e.base, A.Name):
            arr = self.lookup(e.base.id)
            if arr is None:
                self.err(f"undefined object '{e.base.id}'", e)
            if arr.kind not in ("object-array", "process-array"):
                self.err(f"'{arr.name}' is not an object or process array", e)
            i = self.flat_const_index(arr, e)
            return self.lookup(arr.elements[i]) or self.globals[arr.elements[i]]
        self.err("expected an object", e)

    def flat_const_index(self, arr, e):
        if len(e.index) != len(arr.dims):
            self.err(f"'{arr.name}' needs {len(arr.dims)} indices", e)
        flat = 0
        for x, dim in zip(e.index, arr.dims):
            try:
                v, _ = self.const_value(x)
            except _NotConst:
                self.err(f"index into '{arr.name}' must be constant here", e)
            if not 0 <= v < dim:
                self.err(f"index {v} out of range for '{arr.name}' (size {dim})", e)
            flat = flat * dim + v
        return flat

    # ------------------------------------------------------ constant values

    def const_value(self, e, tilde=False):
        if isinstance(e, A.Num):
            return e.value, e.kind
        if isinstance(e, A.Name):
            lv = self.loopvar(e.id)
            if lv is not None:
                if lv[0] == "const":
                    return lv[1], "int"
                raise _NotConst
            sym = self.lookup(e.id)
            if sym is not None and sym.kind == "const":
                return sym.value, ("int" if sym.type is None else _kind_of(sym.type))
            raise _NotConst
        if isinstance(e, A.Unary):
            v, k = self.const_value(e.operand, tilde)
            if e.op == "-" and k in ("int", "logic"):
                return -v, "int"
            if e.op == "not" and k == "bool":
                return int(not v), "bool"
            raise _NotConst
        if isinstance(e, A.Binary):
            if e.op == "~" and not tilde:
                self.err("operator '~' is only allowed in constant definitions", e)
            a, ka = self.const_value(e.left, tilde)
            b, kb = self.const_value(e.right, tilde)
            op = e.op
            if op in BOOL_OPS:
                if ka != "bool" or kb != "bool":
                    self.err(f"operands of '{op}' must be bool", e)
                return {"and": a and b, "or": a or b, "xor": a != b}[op] and 1 or 0, "bool"
            if op in REL_OPS:
                return int({"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "=": a == b,
                            "<>": a != b}[op]), "bool"
            if "bool" in (ka, kb):
                self.err(f"operator '{op}' needs numeric operands", e)
            kind = "logic" if ka == kb == "logic" else "int"
            if op == "+":
                return a + b, kind
            if op == "-":
                return a - b, kind
            if op == "*":
                return a * b, kind
            if op in ("/", "%"):
                if b == 0:
                    self.err("division by zero in constant expression", e)
                q = _tdiv(a, b)
                return (q if op == "/" else a - b * q), kind
            if op == "~":
                if a < 1 or b < 2:
                    self.err("'~' needs a positive value and a base of at least 2", e)
                return ilog_ceil(a, b), "int"
            if op in ("lsl", "lsr") and b >= 0:
                return (a << b if op == "lsl" else a >> b), kind
            if op in BIT_OPS and a >= 0 and b >= 0:
                return {"land": a & b, "lor": a | b, "lxor": a ^ b}[op], kind
            raise _NotConst
        raise _NotConst

    # ------------------------------------------------------------ expressions

    def literal(self, v, kind, expect, node):
        loc = getattr(node, "loc", None)
        if expect is None:
            if kind == "bool":
                ty = T(BOOL)
            elif kind == "char":
                ty = T(CHAR)
            elif kind == "logic":
                w = getattr(node, "width", None) or max(1, v.bit_length())
                ty = T(LOGIC, min(w, MAX_WIDTH))
            else:
                ty = T(INT, min(signed_bits_needed(v), MAX_WIDTH))
        else:
            ty = expect
            if (kind == "bool") != (expect.base == BOOL):
                self.err(f"type mismatch: {kind.upper()} value where {expect} is expected", node)
            if kind == "char" and expect.base != CHAR:
                conv = "to_int" if expect.base == INT else "to_logic"
                self.err(f"CHAR value used as {expect} without {conv}", node)
        if not ty.fits(v):
            if kind == "logic" and 0 <= v < (1 << ty.width):
                v = ty.wrap(v)
            else:
                self.err(f"constant {v} does not fit in {ty}", node)
        return typed_num(v, ty, loc)

    def peek(self, e):
        """Type an expression has regardless of context, or None if it adapts."""
        if isinstance(e, A.Num):
            return {"char": T(CHAR), "bool": T(BOOL)}.get(e.kind)
        if isinstance(e, A.Name):
            if self.loopvar(e.id) is not None:
                return None
            sym = self.lookup(e.id)
            if sym is not None and sym.kind in STORAGE + ("queue", "channel"):
                return sym.type
            return None
        if isinstance(e, A.Index):
            if isinstance(e.base, A.Name):
                sym = self.lookup(e.base.id)
                if sym is not None and sym.kind == "array":
                    return sym.type
            return None
        if isinstance(e, A.Field):
            return self.peek(self.resolve_field(e))
        if isinstance(e, A.BitSel):
            if e.lo is None:
                return T(LOGIC, 1)
            try:
                return T(LOGIC, self.const_value(e.hi)[0] - self.const_value(e.lo)[0] + 1)
            except (_NotConst, ValueError):
                return None
        if isinstance(e, A.Unary):
            return T(BOOL) if e.op == "not" else self.peek(e.operand)
        if isinstance(e, A.Binary):
            if e.op in REL_OPS or e.op in BOOL_OPS:
                return T(BOOL)
            if e.op == "@":
                lt, rt = self.peek(e.left), self.peek(e.right)
                if lt and rt and lt.width + rt.width <= MAX_WIDTH:
                    return T(LOGIC, lt.width + rt.width)
                return None
            if e.op in SHIFT_OPS:
                return self.peek(e.left)
            return self.peek(e.left) or self.peek(e.right)
        if isinstance(e, A.Conv):
            if e.func in ("to_bool", "to_char"):
                return T(CONV_BASE[e.func])
            return None
        return None

    def flex_default(self, *es):
        """Type for a context-free expression made of loop counters, conversions and literals."""
        best = None
        for e in es:
            for n in e.walk():
                ty = None
                if isinstance(n, A.Name):
                    lv = self.loopvar(n.id)
                    if lv is not None and lv[0] == "reg":
                        ty = lv[2]
                elif isinstance(n, A.Conv) and n.func in ("to_int", "to_logic"):
                    src = self.peek(n.operand)
                    if src is not None:
                        ty = T(CONV_BASE[n.func], src.width)
                if ty is not None and (best is None or ty.width > best.width):
                    best = ty
        return best or T(INT, DEFAULT_INT_WIDTH)

    def common_type(self, l, r, expect, node):
        lt, rt = self.peek(l), self.peek(r)
        if lt and rt and lt != rt:
            what = "widths" if lt.base == rt.base else "types"
            self.err(f"operands of '{node.op}' have different {what}: {lt} and {rt} "
                     f"(use an explicit conversion)", node)
        if lt or rt:
            return lt or rt
        if expect is not None and expect.base != BOOL:
            return expect
        return self.flex_default(l, r)

    def expr(self, e, expect=None):
        try:
            v, kind = self.const_value(e)
        except _NotConst:
            pass
        else:
            return self.literal(v, kind, expect, e)
        if isinstance(e, A.Name):
            return self.name_expr(e, expect)
        if isinstance(e, A.Index):
            return self.index_expr(e)
        if isinstance(e, A.Field):
            return self.expr(self.resolve_field(e), expect)
        if isinstance(e, A.BitSel):
            return self.bitsel_expr(e)
        if isinstance(e, A.Unary):
            if e.op == "not":
                x = self.expr(e.operand, BOOLT)
                self.want_bool(x, e)
                return self._typed(A.Unary("not", x, loc=e.loc), BOOLT)
            ty = self.peek(e.operand) or (expect if expect and expect.base != BOOL
                                          else self.flex_default(e.operand))
            if ty.base == BOOL:
                self.err(f"operator '{e.op}' needs a numeric operand", e)
            x = self.expr(e.operand, ty)
            return self._typed(A.Unary(e.op, x, loc=e.loc), ty)
        if isinstance(e, A.Binary):
            return self.binary_expr(e, expect)
        if isinstance(e, A.Conv):
            return self.conv_expr(e, expect)
        if isinstance(e, A.Call):
            if e.func in self.functions:
                self.err(f"call of '{e.func}' is not allowed in this position", e)
            self.err(f"undefined function '{e.func}'", e)
        if isinstance(e, A.TimeValue):
            self.err("time values are only allowed in wait statements and timer methods", e)
        if isinstance(e, A.Str):
            self.err("string literals are only allowed as parameters", e)
        if isinstance(e, A.SelfIndex):
            self.err("'#' used outside a process array", e)
        self.err("unsupported expression", e)

    @staticmethod
    def _typed(node, ty):
        node.ty = ty
        return node

    def want_bool(self, x, node):
        if x.ty.base != BOOL:
            self.err(f"expected a bool condition, found {x.ty}", node)

    def name_expr(self, e, expect):
        lv = self.loopvar(e.id)
        if lv is not None:
            n = self._typed(A.Name(lv[1], loc=e.loc), lv[2])
            if expect is not None and expect.base in (INT, LOGIC, CHAR):
                return self._typed(A.Conv("auto", n, loc=e.loc), expect)
            return n
        sym = self.lookup(e.id)
        if sym is None:
            self.err(f"undefined symbol '{e.id}'", e)
        if sym.kind in STORAGE or sym.kind in ("queue", "channel"):
            return self._typed(A.Name(sym.name, loc=e.loc), sym.type)
        if sym.kind == "array":
            self.err(f"array '{sym.name}' used without an index", e)
        self.err(f"'{sym.name}' is a {sym.kind}, not a data object", e)

    def index_expr(self, e):
        if not isinstance(e.base, A.Name):
            self.err("only named arrays can be indexed", e)
        sym = self.lookup(e.base.id)
        if sym is None:
            self.err(f"undefined symbol '{e.base.id}'", e)
        if sym.kind in ("object-array", "process-array"):
            el = self.resolve_object(e)
            if el.kind in ("queue", "channel"):
                return self._typed(A.Name(el.name, loc=e.loc), el.type)
            self.err(f"'{el.name}' is a {el.kind}, not a data object", e)
        if sym.kind != "array":
            self.err(f"'{sym.name}' is not an array", e)
        idx = self.flat_index(sym, e)
        base = self._typed(A.Name(sym.name, loc=e.loc), sym.type)
        return self._typed(A.Index(base, [idx], loc=e.loc), sym.type)

    def flat_index(self, sym, e):
        if len(e.index) != len(sym.dims):
            self.err(f"'{sym.name}' needs {len(sym.dims)} indices", e)
        try:
            return typed_num(self.flat_const_index(sym, e), T(INT, signed_bits_needed(sym.size)),
                             e.loc)
        except CompileError as exc:
            if "must be constant" not in str(exc):
                raise
            self.sink.items.pop()
        parts = []
        for x in e.index:
            t = self.expr(x)
            if t.ty.base not in (INT, LOGIC):
                self.err("array index must be an int or logic value", x)
            parts.append(t)
        if len(parts) == 1:
            return parts[0]
        ity = T(INT, min(MAX_WIDTH, signed_bits_needed(sym.size) + 1))
        acc = None
        for t, dim in zip(parts, sym.dims):
            t = self._typed(A.Conv("auto", t), ity)
            if acc is None:
                acc = t
            else:
                acc = self._typed(A.Binary("+", self._typed(
                    A.Binary("*", acc, typed_num(dim, ity)), ity), t), ity)
        return acc

    def resolve_field(self, e: A.Field):
        base = e.base
        bname = base.id if isinstance(base, A.Name) else (
            base.base.id if isinstance(base, A.Index) and isinstance(base.base, A.Name) else None)
        sym = self.lookup(bname) if bname else None
        if sym is None:
            self.err("field access needs a struct object", e)
        if sym.kind == "struct":
            sub = sym.params["fields"].get(e.name)
            if sub is None:
                self.err(f"struct '{sym.name}' has no element '{e.name}'", e)
            if isinstance(base, A.Index):
                return A.Index(A.Name(sub, loc=base.loc), base.index, loc=e.loc)
            return A.Name(sub, loc=e.loc)
        bits = sym.params.get("bits")
        if bits is not None:
            if e.name not in bits:
                self.err(f"bit struct of '{sym.name}' has no element '{e.name}'", e)
            hi, lo = bits[e.name]
            return A.BitSel(base, A.Num(hi), A.Num(lo), loc=e.loc)
        if sym.kind == "component":
            self.err("component ports are not modeled", e)
        self.err(f"'{sym.name}' has no elements", e)

    def bitsel_expr(self, e):
        base = self.expr(e.base)
        if base.ty.base not in (INT, LOGIC) or not isinstance(base, (A.Name, A.Index)):
            self.err("bit selection needs an int or logic object", e)
        w = base.ty.width
        if e.lo is None:
            try:
                hi, _ = self.const_value(e.hi)
            except _NotConst:
                idx = self.expr(e.hi)
                if idx.ty.base not in (INT, LOGIC):
                    self.err("bit index must be an int or logic value", e)
                return self._typed(A.BitSel(base, idx, None, loc=e.loc), T(LOGIC, 1))
            lo = hi
        else:
            hi, lo = self.const_int(e.hi, "bit range"), self.const_int(e.lo, "bit range")
        if not 0 <= lo <= hi < w:
            self.err(f"bit range {hi}..{lo} outside 0..{w - 1}", e)
        ity = T(INT, signed_bits_needed(w))
        return self._typed(A.BitSel(base, typed_num(hi, ity), typed_num(lo, ity), loc=e.loc),
                           T(LOGIC, hi - lo + 1))

    def binary_expr(self, e, expect):
        op = e.op
        if op == "~":
            self.err("operator '~' is only allowed in constant definitions", e)
        if op in BOOL_OPS:
            l, r = self.expr(e.left, BOOLT), self.expr(e.right, BOOLT)
            self.want_bool(l, e.left)
            self.want_bool(r, e.right)
            return self._typed(A.Binary(op, l, r, loc=e.loc), BOOLT)
        if op == "@":
            l, r = self.expr(e.left), self.expr(e.right)
            if l.ty.base != LOGIC or r.ty.base != LOGIC:
                self.err("operands of '@' must be logic vectors", e)
            if l.ty.width + r.ty.width > MAX_WIDTH:
                self.err(f"concatenation wider than {MAX_WIDTH} bits", e)
            return self._typed(A.Binary(op, l, r, loc=e.loc), T(LOGIC, l.ty.width + r.ty.width))
        if op in SHIFT_OPS:
            ty = self.peek(e.left) or (expect if expect and expect.base != BOOL
                                       else self.flex_default(e.left))
            l = self.expr(e.left, ty)
            r = self.expr(e.right)
            if ty.base == BOOL or r.ty.base not in (INT, LOGIC):
                self.err(f"operator '{op}' needs numeric operands", e)
            return self._typed(A.Binary(op, l, r, loc=e.loc), ty)
        if op in REL_OPS:
            ty = self.common_type(e.left, e.right, None, e)
            l, r = self.expr(e.left, ty), self.expr(e.right, ty)
            if ty.base == BOOL and op not in ("=", "<>"):
                self.err(f"operator '{op}' is not defined on bool", e)
            return self._typed(A.Binary(op, l, r, loc=e.loc), BOOLT)
        ty = self.common_type(e.left, e.right, expect, e)
        if ty.base == BOOL:
            self.err(f"operator '{op}' is not defined on bool", e)
        l, r = self.expr(e.left, ty), self.expr(e.right, ty)
        return self._typed(A.Binary(op, l, r, loc=e.loc), ty)

    def conv_expr(self, e, expect):
        x = self.expr(e.operand)
        base = CONV_BASE[e.func]
        if base in (BOOL, CHAR):
            ty = T(base)
        elif expect is not None and expect.base == base:
            ty = expect
        else:
            ty = T(base, x.ty.width)
        return self._typed(A.Conv(e.func, x, loc=e.loc), ty)

    # -------------------------------------------------------------- statements

    def stmts(self, lst):
        out = []
        for s in lst:
            out.extend(self.stmt(s))
        return out

    def block(self, s) -> A.Block:
        if s is None:
            return None
        return A.Block([], self.stmt(s), loc=s.loc)

    def stmt(self, s):
        if isinstance(s, (A.Assign, A.Bind, A.MethodCall, A.ProcCall)):
            node = self.dynamic_object_index(s)
            if node is not None:
                return self.stmt(self.index_match(s, node))
        if isinstance(s, A.Assign):
            return self.assign(s)
        if isinstance(s, A.Bind):
            return [self.bind(s)]
        if isinstance(s, A.Block):
            for d in s.decls:
                self.declare(d, self.cur.locals, "local")
            if A.param_value(s.params, "unroll"):
                self.err("'unroll' applies to for-loops", s)
            return self.stmts(s.stmts)
        if isinstance(s, A.If):
            try:
                v, kind = self.const_value(s.cond)
            except _NotConst:
                pass
            else:
                # constant conditions select a branch before the other one is checked,
                # so replicated bodies may index out of range in the dead branch
                if kind != "bool":
                    self.err("expected a bool condition", s.cond)
                taken = s.then if v else s.orelse
                return [] if taken is None else self.stmt(taken)
            pre = []
            cond = self.expr(self.hoist(s.cond, pre), BOOLT)
            self.want_bool(cond, s.cond)
            return pre + [A.If(cond, self.block(s.then), self.block(s.orelse), loc=s.loc)]
        if isinstance(s, A.Match):
            return self.match(s)
        if isinstance(s, A.Try):
            for h in s.handlers:
                for n in h.names or ():
                    if n not in self.exceptions:
                        self.err(f"undefined exception '{n}'", s)
            handlers = [A.Handler(h.names, self.block(h.body)) for h in s.handlers]
            return [A.Try(self.block(s.body), handlers, loc=s.loc)]
        if isinstance(s, A.Raise):
            if s.name not in self.exceptions:
                self.err(f"undefined exception '{s.name}'", s)
            return [A.Raise(s.name, loc=s.loc)]
        if isinstance(s, A.For):
            return self.for_loop(s)
        if isinstance(s, A.While):
            self.no_calls(s.cond)
            cond = self.expr(s.cond, BOOLT)
            self.want_bool(cond, s.cond)
            return [A.While(cond, self.block(s.body), loc=s.loc)]
        if isinstance(s, A.Always):
            return [A.Always(self.block(s.body), loc=s.loc)]
        if isinstance(s, A.WaitFor):
            return [self.wait(s)]
        if isinstance(s, A.MethodCall):
            return self.method(s)
        if isinstance(s, A.ProcCall):
            if s.name not in self.functions:
                self.err(f"undefined function '{s.name}'", s)
            pre = []
            args = [self.hoist(a, pre) for a in s.args]
            return pre + self.call(s.name, args, [], s)
        if isinstance(s, A.Nop):
            return []
        self.err("unsupported statement", s)

    def no_calls(self, e):
        for n in e.walk():
            if isinstance(n, A.Call):
                self.err("function calls are not allowed in loop conditions", n)

    def dynamic_object_index(self, s):
        for n in s.walk():
            if isinstance(n, A.Index) and isinstance(n.base, A.Name):
                sym = self.lookup(n.base.id)
                if sym is None or sym.kind not in ("object-array", "process-array"):
                    continue
                for x in n.index:
                    try:
                        self.const_value(x)
                    except _NotConst:
                        return n
        return None

    def index_match(self, s, node):
        """Rewrite a statement using a dynamic object-array index into a match on the index."""
        sym = self.lookup(node.base.id)
        if len(sym.dims) != 1:
            self.err("dynamic indices into multi-dimensional object arrays are not supported", node)
        arms = []
        for k in range(sym.size):
            repl = A.Index(node.base, [A.Num(k)], loc=node.loc)
            clone = copy.deepcopy(s, {id(node): repl})
            arms.append(A.MatchArm([A.Num(k)], clone))
        return A.Match(node.index[0], arms, loc=s.loc)

    def hoist(self, e, pre):
        """Replace function calls inside e by temporaries assigned in pre."""
        def fn(n):
            if not isinstance(n, A.Call):
                return None
            f = self.functions.get(n.func)
            if f is None:
                self.err(f"undefined function '{n.func}'", n)
            if len(f.rets) != 1 or f.rets[0].type is None:
                self.err(f"function '{n.func}' must return exactly one typed value to be used "
                         f"in an expression", n)
            ty, _ = self.data_type_of(f.rets[0].type, n)
            tmp = f"CALL_{n.func}_{self.counter(('call', n.func))}"
            self.new_local(tmp, "reg", ty, "call-temp")
            pre.extend(self.call(n.func, n.args, [A.Name(tmp, loc=n.loc)], n))
            return A.Name(tmp, loc=n.loc)
        return A.map_exprs(e, fn)

    def call(self, fname, args, targets, node):
        f = self.functions[fname]
        if len(args) != len(f.args):
            self.err(f"'{fname}' expects {len(f.args)} arguments, got {len(args)}", node)
        if len(targets) > len(f.rets):
            self.err(f"'{fname}' returns {len(f.rets)} values, {len(targets)} expected", node)
        if fname not in self.shared:
            return self.inline(f, args, targets, node)
        info = self.shared[fname]
        targs = []
        for a, reg in zip(args, info.args):
            rty = self.globals[reg].type
            x = self.expr(a, rty)
            self.check_assignable(x.ty, rty, reg, a)
            targs.append(x)
        ttargets = []
        for t, reg in zip(targets, info.rets):
            lv = self.lvalue(t)
            if isinstance(lv, A.BitSel):
                self.err("function results cannot be assigned to bit selections", t)
            self.check_assignable(self.globals[reg].type, lv.ty, self.target_name(lv), t)
            ttargets.append(lv)
        return [A.FunCall(fname, targs, ttargets, loc=node.loc)]

    def inline(self, f, args, targets, node):
        if f.name in self.inline_stack:
            self.err(f"recursive inline function '{f.name}'", node)
        mapping = {formal.name: a for formal, a in zip(f.args, args)}
        for formal, t in zip(f.rets, targets):
            mapping[formal.name] = t
        for formal in f.rets[len(targets):]:
            if formal.type is None:
                self.err(f"unused result '{formal.name}' of '{f.name}' needs a type", node)
            ty, _ = self.data_type_of(formal.type, node)
            tmp = f"{f.name}_{formal.name}"
            if tmp not in self.cur.locals:
                self.new_local(tmp, "reg", ty, "call-temp")
            mapping[formal.name] = A.Name(tmp)
        for d in f.decls:
            names = getattr(d, "names", [])
            if names and all(n in self.cur.locals for n in names):
                continue
            self.declare(d, self.cur.locals, "local")
        body = A.map_exprs(f.body, lambda e: (
            copy.deepcopy(mapping[e.id]) if isinstance(e, A.Name) and e.id in mapping else None))
        self.inline_stack.append(f.name)
        try:
            return self.stmts(body)
        finally:
            self.inline_stack.pop()

    def target_name(self, lv):
        while not isinstance(lv, A.Name):
            lv = lv.base
        return lv.id

    def check_assignable(self, vty, tty, name, node):
        if vty.base != tty.base:
            hint = {INT: "to_int", LOGIC: "to_logic", CHAR: "to_char", BOOL: "to_bool"}[tty.base]
            self.err(f"{vty.base} assigned to {tty.base} '{name}' without {hint}", node)

    def lvalue(self, t):
        if isinstance(t, A.Name):
            if self.loopvar(t.id) is not None:
                self.err(f"loop variable '{t.id}' cannot be assigned", t)
            sym = self.lookup(t.id)
            if sym is None:
                self.err(f"undefined symbol '{t.id}'", t)
            if sym.kind == "const":
                self.err(f"cannot assign to constant '{t.id}'", t)
            if sym.kind in STORAGE or sym.kind in ("queue", "channel"):
                return self._typed(A.Name(sym.name, loc=t.loc), sym.type)
            self.err(f"'{t.id}' is a {sym.kind} and cannot be assigned", t)
        if isinstance(t, A.Index):
            if isinstance(t.base, A.Name):
                sym = self.lookup(t.base.id)
                if sym is not None and sym.kind == "object-array":
                    el = self.resolve_object(t)
                    if el.kind not in ("queue", "channel"):
                        self.err(f"'{el.name}' cannot be assigned", t)
                    return self._typed(A.Name(el.name, loc=t.loc), el.type)
            return self.index_expr(t)
        if isinstance(t, A.Field):
            return self.lvalue(self.resolve_field(t))
        if isinstance(t, A.BitSel):
            base = self.lvalue(t.base)
            if isinstance(base, A.Name) and self.lookup(base.id).kind in ("queue", "channel"):
                self.err("bit selection of a queue or channel", t)
            sel = self.bitsel_expr(A.BitSel(t.base, t.hi, t.lo, loc=t.loc))
            sel.base = base
            return sel
        self.err("invalid assignment target", t)

    def assign(self, s):
        pre = []
        target, value = s.target, s.value
        if isinstance(value, A.Call) and value.func in self.functions:
            args = [self.hoist(a, pre) for a in value.args]
            targets = target.items if isinstance(target, A.TupleTarget) else [target]
            return pre + self.call(value.func, args, targets, s)
        if isinstance(target, A.TupleTarget):
            self.err("multiple assignment targets need a function call", s)
        value = self.hoist(value, pre)
        return pre + [self.simple_assign(target, value, s)]

    def is_queue_ref(self, e):
        if isinstance(e, A.Name) and self.loopvar(e.id) is None:
            sym = self.lookup(e.id)
            return sym is not None and sym.kind in ("queue", "channel")
        if isinstance(e, A.Index) and isinstance(e.base, A.Name):
            sym = self.lookup(e.base.id)
            return (sym is not None and sym.kind == "object-array"
                    and sym.elem_kind in ("queue", "channel"))
        return False

    def simple_assign(self, target, value, node):
        lv = self.lvalue(target)
        tsym = self.lookup(self.target_name(lv))
        if self.is_queue_ref(value):
            if tsym.kind in ("queue", "channel"):
                self.err("queue to queue transfer needs an intermediate register", node)
            v = self.expr(value)
        else:
            for n in value.walk():
                if self.is_queue_ref(n):
                    self.err("a queue or channel read must be the whole right-hand side", n)
            v = self.expr(value, lv.ty)
        self.check_assignable(v.ty, lv.ty, self.target_name(lv), node)
        if isinstance(lv, A.BitSel):
            return self.bitsel_assign(lv, v, node)
        return A.Assign(lv, v, loc=node.loc)

    def bitsel_assign(self, lv, v, node):
        base = lv.base
        if base.ty.base != LOGIC:
            self.err("bit-select assignment needs a logic object", node)
        wty = base.ty
        full = (1 << wty.width) - 1
        wide = self._typed(A.Conv("auto", v), wty)
        if lv.lo is None:
            pos = lv.hi
            one = typed_num(1, wty)
            mask = self._typed(A.Unary("lnot", self._typed(A.Binary("lsl", one, pos), wty)), wty)
            shifted = self._typed(A.Binary("lsl", wide, copy.deepcopy(pos)), wty)
        else:
            hi, lo = lv.hi.value, lv.lo.value
            m = ((1 << (hi - lo + 1)) - 1) << lo
            mask = typed_num(full & ~m, wty)
            shifted = wide if lo == 0 else self._typed(
                A.Binary("lsl", wide, typed_num(lo, T(INT, signed_bits_needed(lo)))), wty)
        kept = self._typed(A.Binary("land", copy.deepcopy(base), mask), wty)
        return A.Assign(base, self._typed(A.Binary("lor", kept, shifted), wty), loc=node.loc)

    def bind(self, s):
        out = []
        for x in s.stmts:
            if not isinstance(x, A.Assign) or isinstance(x.target, A.TupleTarget):
                self.err("a bound block may contain only assignments", x)
            for n in x.value.walk():
                if isinstance(n, A.Call):
                    self.err("function calls are not allowed in a bound block", n)
            out.append(self.simple_assign(x.target, x.value, x))
        blocks = {}
        for a in out:
            for n in [a.target, *a.value.walk()]:
                name = n.id if isinstance(n, A.Name) else (
                    n.base.id if isinstance(n, A.Index) else None)
                sym = self.lookup(name) if name else None
                if sym is not None and sym.in_ram:
                    blocks[sym.block] = blocks.get(sym.block, 0) + 1
        for b, count in blocks.items():
            if count > 1:
                self.err(f"bound block accesses RAM block '{b}' more than once", s)
        return A.Bind(out, s.comma_form, loc=s.loc)

    def match(self, s):
        pre = []
        e = self.expr(self.hoist(s.expr, pre))
        arms = []
        for arm in s.arms:
            values = None
            if arm.values is not None:
                values = []
                for v in arm.values:
                    if isinstance(v, tuple):
                        lo, hi, down = v
                        values.append((self.expr(lo, e.ty), self.expr(hi, e.ty), down))
                        for x in values[-1][:2]:
                            if not isinstance(x, A.Num):
                                self.err("match values must be constants", s)
                    else:
                        x = self.expr(v, e.ty)
                        if not isinstance(x, A.Num):
                            self.err("match values must be constants", v)
                        values.append(x)
            arms.append(A.MatchArm(values, self.block(arm.body)))
        return pre + [A.Match(e, arms, loc=s.loc)]

    def for_loop(self, s):
        if A.param_value(s.params, "unroll"):
            a = self.const_int(s.start, "unrolled loop bound")
            b = self.const_int(s.stop, "unrolled loop bound")
            step = 1 if s.step is None else self.const_int(s.step, "loop step")
            values = range(a, b - 1, -step) if s.downto else range(a, b + 1, step)
            out = []
            for v in values:
                self.loopvars.append({s.var: ("const", v)})
                try:
                    out.extend(self.stmts(s.body.stmts if isinstance(s.body, A.Block)
                                          else [s.body]))
                finally:
                    self.loopvars.pop()
            return out
        self.no_calls(s.start)
        self.no_calls(s.stop)
        step = 1 if s.step is None else self.const_int(s.step, "loop step")
        if step < 1:
            self.err("loop step must be a positive constant", s)
        bounds = []
        dynamic = []
        for x in (s.start, s.stop):
            try:
                bounds.append(self.const_value(x)[0])
            except _NotConst:
                dynamic.append(self.expr(x))
        if dynamic:
            w = max(MIN_LOOP_WIDTH, max(d.ty.width for d in dynamic) + 1)
        else:
            a, b = bounds
            hi = max(abs(a), abs(b) + step - 1)
            w = max(MIN_LOOP_WIDTH, hi.bit_length() + 2)
        ty = T(INT, min(w, MAX_WIDTH))
        reg = f"LOOP_{s.var}_{self.counter(('loop', s.var))}"
        self.new_local(reg, "reg", ty, "loop")

        def bound(x):
            t = self.expr(x, ty)
            if t.ty != ty:
                t = self._typed(A.Conv("auto", t), ty)
            return t

        start, stop = bound(s.start), bound(s.stop)
        self.loopvars.append({s.var: ("reg", reg, ty)})
        try:
            body = self.block(s.body)
        finally:
            self.loopvars.pop()
        stepn = None if s.step is None else typed_num(step, ty)
        return [A.For(reg, start, stop, body, s.downto, stepn, s.params, loc=s.loc, reg=reg)]

    def wait(self, s):
        what = s.what
        if isinstance(what, A.TimeValue):
            w = typed_num(self.cycles(what), T(INT, MAX_WIDTH))
        else:
            try:
                v, kind = self.const_value(what)
            except _NotConst:
                self.no_calls(what)
                w = self.expr(what, BOOLT)
                self.want_bool(w, what)
            else:
                if kind == "bool" or v < 0:
                    self.err("wait needs a cycle count, a time or a condition", s)
                w = typed_num(v, T(INT, MAX_WIDTH))
        with_stmt = self.block(s.with_stmt)
        else_stmt = self.block(s.else_stmt)
        for b in (with_stmt, else_stmt):
            if b is not None and not all(isinstance(x, A.Assign) for x in b.stmts):
                self.err("wait applies only assignments", s)
        return A.WaitFor(w, with_stmt, else_stmt, loc=s.loc)

    def method(self, s):
        sym = self.resolve_object(s.obj)
        kind = sym.kind
        if kind == "system":
            return []
        if kind == "process" and sym.role == "function":
            self.err(f"shared function process '{sym.name}' cannot be controlled directly", s)
        if kind in STORAGE or kind == "array":
            self.err(f"'{sym.name}' is a data object and has no methods", s)
        table = METHODS.get(kind)
        if table is None:
            self.err(f"objects of type '{kind}' are not modeled by this compiler", s)
        if s.method not in table:
            self.err(f"{kind} '{sym.name}' has no method '{s.method}'", s)
        if len(s.args) != table[s.method]:
            self.err(f"method '{s.method}' expects {table[s.method]} arguments", s)
        obj = A.Name(sym.name, loc=s.loc)
        if kind in ("queue", "channel") and s.method in ("read", "write"):
            if s.method == "read":
                return [self.simple_assign(s.args[0], obj, s)]
            return [self.simple_assign(obj, s.args[0], s)]
        args = []
        if kind == "random" and s.method == "read":
            lv = self.lvalue(s.args[0])
            if lv.ty.base not in (INT, LOGIC) or isinstance(lv, A.BitSel):
                self.err("random values can only be read into int or logic objects", s)
            args = [lv]
        elif kind == "timer" and s.method == "time":
            a = s.args[0]
            n = self.cycles(a) if isinstance(a, A.TimeValue) else self.const_int(a, "interval")
            args = [typed_num(n, T(INT, MAX_WIDTH))]
        elif s.args:
            args = [typed_num(self.const_int(s.args[0], "method argument"), T(INT, MAX_WIDTH))]
        return [A.MethodCall(obj, s.method, args, loc=s.loc)]

    # ------------------------------------------------------------------ checks

    def layout_ram(self, tm):
        cells = {}
        syms = list(tm.symbols.values())
        for p in tm.processes:
            syms.extend(p.locals.values())
        for sym in syms:
            if not sym.in_ram:
                continue
            blk = tm.symbols.get(sym.block)
            if blk is None:
                blk = Symbol(sym.block, "ram-block", None, "global")
                tm.symbols[sym.block] = blk
            elif blk.kind != "ram-block":
                self.err(f"'{sym.block}' is not a RAM block", sym)
            sym.offset = cells.get(sym.block, 0)
            cells[sym.block] = sym.offset + sym.size
            blk.size = cells[sym.block]
            blk.params["width"] = max(blk.params.get("width", 1), sym.type.width)
            blk.elements.append(sym.name)

    def check_signals(self, tm):
        for name, users in tm.accesses.items():
            sym = tm.symbols.get(name)
            if sym is None or not (sym.kind == "sig" or sym.elem_kind == "sig"):
                continue
            writers = [p for p in tm.process_names if "write" in users.get(p, ())]
            if len(writers) > 1:
                self.err(f"signal '{name}' is assigned in more than one process "
                         f"({', '.join(writers)})", sym)


def analyze(module: A.Module) -> TypedModule:
    """Type-check and normalize a parsed module."""
    return Analyzer(module).run()


# ---------------------------------------------------------------- exceptions

def escaping(stmts, escapes_of):
    """Exception names that can leave a statement list."""
    out = set()
    for s in stmts:
        out |= _escaping_stmt(s, escapes_of)
    return out


def _escaping_stmt(s, escapes_of):
    if isinstance(s, A.Raise):
        return {s.name}
    if isinstance(s, A.FunCall):
        return set(escapes_of(f"FUN_{s.func}"))
    if isinstance(s, A.MethodCall) and s.method == "call":
        return set(escapes_of(s.obj.id))
    if isinstance(s, A.Try):
        inner = escaping(s.body.stmts, escapes_of)
        handled = set()
        out = set()
        for h in s.handlers:
            if h.names is None:
                handled = set(inner)
            else:
                handled |= set(h.names)
            out |= escaping(h.body.stmts, escapes_of)
        return (inner - handled) | out
    out = set()
    for c in _sub_blocks(s):
        out |= escaping(c.stmts, escapes_of)
    return out


def _sub_blocks(s):
    if isinstance(s, A.If):
        return [b for b in (s.then, s.orelse) if b is not None]
    if isinstance(s, A.Match):
        return [a.body for a in s.arms]
    if isinstance(s, (A.For, A.While, A.Always)):
        return [s.body]
    if isinstance(s, A.WaitFor):
        return [b for b in (s.with_stmt, s.else_stmt) if b is not None]
    if isinstance(s, A.Try):
        return [s.body] + [h.body for h in s.handlers]
    return []


def uses_exceptions(stmts, escapes_of):
    for s in stmts:
        if isinstance(s, (A.Raise, A.Try)):
            return True
        if isinstance(s, A.FunCall) and escapes_of(f"FUN_{s.func}"):
            return True
        if isinstance(s, A.MethodCall) and s.method == "call" and escapes_of(s.obj.id):
            return True
        if any(uses_exceptions(b.stmts, escapes_of) for b in _sub_blocks(s)):
            return True
    return False


def assign_exception_registers(tm: TypedModule):
    """Compute escaping exceptions per process and create EXC_<p> registers."""
    esc = {p.name: set() for p in tm.processes}
    changed = True
    while changed:
        changed = False
        for p in tm.processes:
            new = escaping(p.body, lambda n: esc.get(n, ()))
            if new != esc[p.name]:
                esc[p.name] = new
                changed = True
    width = max(1, len(tm.exceptions).bit_length())
    for p in tm.processes:
        p.escapes = esc[p.name]
        if not uses_exceptions(p.body, lambda n: esc.get(n, ())):
            p.exc_reg = None
            continue
        reg = f"EXC_{p.name}"
        p.exc_reg = reg
        sym = Symbol(reg, "reg", T(LOGIC, width), "global" if p.escapes else "local",
                     p.name, role="exc")
        p.locals.pop(reg, None)
        tm.symbols.pop(reg, None)
        if p.escapes:
            tm.symbols[reg] = sym
        else:
            p.locals[reg] = sym


# ------------------------------------------------------------------ accesses

def collect_accesses(tm: TypedModule) -> dict:
    """Map each global object to the processes using it and the operations they perform."""
    table: dict = {}

    def note(obj, proc, op):
        table.setdefault(obj, {}).setdefault(proc, set()).add(op)

    for p in tm.processes:
        def glob(name):
            if name in p.locals:
                return None
            return tm.symbols.get(name)

        def reads(e):
            for n in e.walk():
                if isinstance(n, A.Name):
                    sym = glob(n.id)
                    if sym is None:
                        continue
                    if sym.in_ram:
                        note(sym.block, p.name, "read")
                    elif sym.kind in STORAGE or sym.kind in ("queue", "channel", "array"):
                        note(sym.name, p.name, "read")
                elif isinstance(n, A.Index):
                    continue

        def write(t):
            while isinstance(t, (A.BitSel, A.Index)):
                if isinstance(t, A.Index):
                    for i in t.index:
                        reads(i)
                else:
                    reads(t.hi)
                t = t.base
            sym = glob(t.id)
            if sym is None:
                return
            note(sym.block if sym.in_ram else sym.name, p.name, "write")

        def local_ram(t):
            while not isinstance(t, A.Name):
                t = t.base
            sym = p.locals.get(t.id)
            if sym is not None and sym.in_ram:
                return sym
            return None

        def visit(stmts):
            for s in stmts:
                if isinstance(s, A.Assign):
                    write(s.target)
                    reads(s.value)
                    sym = local_ram(s.target)
                    if sym:
                        note(sym.block, p.name, "write")
                    for n in s.value.walk():
                        if isinstance(n, A.Name) and n.id in p.locals and p.locals[n.id].in_ram:
                            note(p.locals[n.id].block, p.name, "read")
                elif isinstance(s, A.Bind):
                    visit(s.stmts)
                elif isinstance(s, A.FunCall):
                    f = tm.symbols[f"FUN_{s.func}"]
                    info = tm.process(f.name)
                    note(f"LOCK_{f.name}", p.name, "lock")
                    note(f"LOCK_{f.name}", p.name, "unlock")
                    for a, reg in zip(s.args, info.args):
                        reads(a)
                        note(reg, p.name, "write")
                    note(f.name, p.name, "call")
                    for t, reg in zip(s.targets, info.rets):
                        note(reg, p.name, "read")
                        write(t)
                    if info.escapes:
                        note(info.exc_reg, p.name, "read")
                elif isinstance(s, A.MethodCall):
                    note(s.obj.id, p.name, s.method)
                    for a in s.args:
                        if isinstance(a, (A.Name, A.Index)) and s.method == "read":
                            write(a)
                    if s.method == "call":
                        callee = tm.process(s.obj.id)
                        if callee.escapes:
                            note(callee.exc_reg, p.name, "read")
                else:
                    if isinstance(s, A.If):
                        reads(s.cond)
                    elif isinstance(s, A.Match):
                        reads(s.expr)
                    elif isinstance(s, A.For):
                        reads(s.start)
                        reads(s.stop)
                    elif isinstance(s, A.While):
                        reads(s.cond)
                    elif isinstance(s, A.WaitFor):
                        reads(s.what)
                    for b in _sub_blocks(s):
                        visit(b.stmts)

        visit(p.body)
        if p.exc_reg and p.escapes:
            note(p.exc_reg, p.name, "write")
        if p.kind == "function":
            for reg in p.args:
                note(reg, p.name, "read")
    return table
