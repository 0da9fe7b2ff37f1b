"""Syntax tree of a ConPro-style module.

Nodes compare structurally; locations and sema annotations are excluded from
equality so that a re-parsed pretty print equals the original tree.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields, is_dataclass, replace

from ..diagnostics import NOWHERE, Loc


def _loc():
    return field(default=NOWHERE, compare=False, repr=False)


def _ann():
    return field(default=None, compare=False, repr=False)


@dataclass
class Param:
    name: str  # may be dotted, e.g. Semaphore.depth
    value: object  # Expr, or None for a bare flag such as "bind"


@dataclass
class TypeRef:
    name: str  # int logic bool char value or a user type name
    width: object = None  # Expr or None
    loc: Loc = _loc()


class Node:
    def children(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Node):
                yield v
            elif isinstance(v, (list, tuple)):
                for x in v:
                    if isinstance(x, Node):
                        yield x
                    elif isinstance(x, (list, tuple)):
                        yield from (y for y in x if isinstance(y, Node))

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def clone(self):
        return copy.deepcopy(self)


# ---------------------------------------------------------------- expressions

class Expr(Node):
    pass


@dataclass
class Num(Expr):
    value: int
    kind: str = "int"  # int logic char bool
    width: int | None = None  # explicit digit width of 0b/0x literals
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Str(Expr):
    value: str
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Name(Expr):
    id: str
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class SelfIndex(Expr):
    """`#`, the process-array element index."""
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Index(Expr):
    base: Expr
    index: list
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Field(Expr):
    base: Expr
    name: str
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class BitSel(Expr):
    """x[i] when lo is None, x[hi to lo] / x[hi downto lo] otherwise."""
    base: Expr
    hi: Expr
    lo: Expr | None = None
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Unary(Expr):
    op: str  # - not lnot
    operand: Expr
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Conv(Expr):
    """Type conversion; func is to_int/to_logic/to_char/to_bool, or 'auto' when sema inserts one."""
    func: str
    operand: Expr
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Call(Expr):
    func: str
    args: list
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class TimeValue(Expr):
    """An integer with a time or frequency unit, e.g. 500 millisec."""
    amount: Expr
    unit: str
    loc: Loc = _loc()
    ty: object = _ann()


# ----------------------------------------------------------------- statements

class Stmt(Node):
    pass


@dataclass
class Assign(Stmt):
    target: Expr  # or TupleTarget for multi-return calls
    value: Expr
    loc: Loc = _loc()


@dataclass
class TupleTarget(Expr):
    items: list
    loc: Loc = _loc()
    ty: object = _ann()


@dataclass
class Bind(Stmt):
    """Bounded block: assignments executed in one step against the pre-state."""
    stmts: list
    comma_form: bool = True
    loc: Loc = _loc()


@dataclass
class Block(Stmt):
    decls: list
    stmts: list
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt | None = None
    loc: Loc = _loc()


@dataclass
class MatchArm:
    values: list | None  # None for `others`; items are Expr or (Expr, Expr, downto) ranges
    body: Stmt


@dataclass
class Match(Stmt):
    expr: Expr
    arms: list
    loc: Loc = _loc()

    def children(self):
        yield self.expr
        for a in self.arms:
            for v in a.values or ():
                if isinstance(v, Node):
                    yield v
                elif isinstance(v, tuple):
                    yield from (x for x in v if isinstance(x, Node))
            yield a.body


@dataclass
class Handler:
    names: list | None  # None for `others`
    body: Stmt


@dataclass
class Try(Stmt):
    body: Stmt
    handlers: list
    loc: Loc = _loc()

    def children(self):
        yield self.body
        for h in self.handlers:
            yield h.body


@dataclass
class Raise(Stmt):
    name: str
    loc: Loc = _loc()


@dataclass
class For(Stmt):
    var: str
    start: Expr
    stop: Expr
    body: Stmt
    downto: bool = False
    step: Expr | None = None
    params: list = field(default_factory=list)
    loc: Loc = _loc()
    reg: str | None = field(default=None, compare=False)  # loop register chosen by sema


@dataclass
class While(Stmt):
    cond: Expr
    body: Stmt
    loc: Loc = _loc()


@dataclass
class Always(Stmt):
    body: Stmt
    loc: Loc = _loc()


@dataclass
class WaitFor(Stmt):
    what: Expr  # cycles, TimeValue or a boolean condition
    with_stmt: Stmt | None = None
    else_stmt: Stmt | None = None
    loc: Loc = _loc()


@dataclass
class MethodCall(Stmt):
    obj: Expr
    method: str
    args: list
    loc: Loc = _loc()


@dataclass
class ProcCall(Stmt):
    name: str
    args: list
    loc: Loc = _loc()


@dataclass
class FunCall(Stmt):
    """Shared function call, produced by sema from Assign(…, Call) and ProcCall."""
    func: str
    args: list
    targets: list
    loc: Loc = _loc()


@dataclass
class Nop(Stmt):
    loc: Loc = _loc()


# --------------------------------------------------------------- declarations

class Decl(Node):
    pass


@dataclass
class Open(Decl):
    name: str
    loc: Loc = _loc()


@dataclass
class Export(Decl):
    names: list
    loc: Loc = _loc()


@dataclass
class StructField:
    name: str
    type: TypeRef | None = None  # data struct element
    width: object = None  # bit struct: width or (hi, lo, downto)
    direction: str | None = None  # component struct port


@dataclass
class TypeDef(Decl):
    name: str
    kind: str  # struct bits enum component
    items: list  # StructField list, or enum member names
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class ObjDef(Decl):
    kind: str  # reg var sig const queue channel block
    names: list
    type: TypeRef | None = None
    init: Expr | None = None  # const value
    block: str | None = None  # var ... in block
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class AbstractDef(Decl):
    names: list
    otype: str  # mutex semaphore event barrier timer random system ...
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class ArrayDef(Decl):
    names: list
    kind: str  # reg var sig queue channel object
    dims: list
    type: TypeRef | None = None  # storage element type
    otype: str | None = None  # object arrays
    block: str | None = None
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class ComponentDef(Decl):
    names: list
    type: str
    loc: Loc = _loc()


@dataclass
class ExceptionDef(Decl):
    names: list
    loc: Loc = _loc()


@dataclass
class ProcessDef(Decl):
    name: str
    decls: list
    body: list
    params: list = field(default_factory=list)
    size: Expr | None = None  # process arrays
    loc: Loc = _loc()


@dataclass
class FormalParam:
    name: str
    type: TypeRef | None


@dataclass
class FunctionDef(Decl):
    name: str
    args: list
    rets: list
    decls: list
    body: list
    params: list = field(default_factory=list)
    loc: Loc = _loc()


@dataclass
class TopStmt(Decl):
    """Statement at module level: configuration method calls and unrolled for-loops."""
    stmt: Stmt
    loc: Loc = _loc()


@dataclass
class Module(Node):
    decls: list
    name: str = "main"
    loc: Loc = _loc()


def param_value(params, name, default=None):
    """Look up a `with` parameter; dotted names match on their last component."""
    for p in params:
        if p.name == name or p.name.rsplit(".", 1)[-1] == name:
            return True if p.value is None else p.value
    return default


def strip_locations(node):
    """Return a copy with every location reset, for debugging comparisons."""
    node = copy.deepcopy(node)
    for n in _all_dataclasses(node):
        if hasattr(n, "loc"):
            n.loc = NOWHERE
    return node


def _all_dataclasses(obj):
    stack = [obj]
    while stack:
        o = stack.pop()
        if is_dataclass(o) and not isinstance(o, type):
            yield o
            stack.extend(getattr(o, f.name) for f in fields(o))
        elif isinstance(o, (list, tuple)):
            stack.extend(o)


def map_exprs(obj, fn):
    """Rebuild a tree bottom-up; fn(expr) returns a replacement or None to keep it.

    Every node is copied, so the input tree is never mutated.
    """
    if isinstance(obj, list):
        return [map_exprs(x, fn) for x in obj]
    if isinstance(obj, tuple):
        return tuple(map_exprs(x, fn) for x in obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        if isinstance(obj, (Loc, TypeRef)):
            return obj
        changes = {f.name: map_exprs(getattr(obj, f.name), fn)
                   for f in fields(obj) if f.name not in ("loc", "ty")}
        new = replace(obj, **changes)
        if isinstance(new, Expr):
            r = fn(new)
            return new if r is None else r
        return new
    return obj
