"""Constant folding and removal of dead objects on the typed tree."""
from __future__ import annotations

import copy

from ..diagnostics import Diagnostic
from ..frontend import ast as A
from .analyzer import collect_accesses, typed_num
from .symbols import STORAGE, TypedModule
from .types import binop, convert, unop


def fold_expr(e):
    def fn(n):
        if isinstance(n, A.Binary) and isinstance(n.left, A.Num) and isinstance(n.right, A.Num):
            v = binop(n.op, n.left.value, n.right.value, n.left.ty, n.right.ty)
            return typed_num(v, n.ty, n.loc)
        if isinstance(n, A.Unary) and isinstance(n.operand, A.Num):
            return typed_num(unop(n.op, n.operand.value, n.operand.ty), n.ty, n.loc)
        if isinstance(n, A.Conv) and isinstance(n.operand, A.Num):
            return typed_num(convert(n.operand.value, n.operand.ty, n.ty), n.ty, n.loc)
        return None
    return A.map_exprs(e, fn)


def _arm_matches(arm, v):
    if arm.values is None:
        return True
    for x in arm.values:
        if isinstance(x, tuple):
            lo, hi = sorted((x[0].value, x[1].value))
            if lo <= v <= hi:
                return True
        elif x.value == v:
            return True
    return False


def fold_stmts(stmts):
    out = []
    for s in stmts:
        out.extend(fold_stmt(s))
    return out


def _blk(b):
    return None if b is None else A.Block([], fold_stmts(b.stmts), loc=b.loc)


def fold_stmt(s):
    if isinstance(s, A.If):
        cond = fold_expr(s.cond)
        if isinstance(cond, A.Num):
            taken = s.then if cond.value else s.orelse
            return [] if taken is None else fold_stmts(taken.stmts)
        return [A.If(cond, _blk(s.then), _blk(s.orelse), loc=s.loc)]
    if isinstance(s, A.While):
        cond = fold_expr(s.cond)
        if isinstance(cond, A.Num) and not cond.value:
            return []
        return [A.While(cond, _blk(s.body), loc=s.loc)]
    if isinstance(s, A.Match):
        e = fold_expr(s.expr)
        arms = [A.MatchArm(a.values, _blk(a.body)) for a in s.arms]
        if isinstance(e, A.Num):
            for a in arms:
                if _arm_matches(a, e.value):
                    return a.body.stmts
            return []
        return [A.Match(e, arms, loc=s.loc)]
    if isinstance(s, A.For):
        return [A.For(s.var, fold_expr(s.start), fold_expr(s.stop), _blk(s.body), s.downto,
                      s.step, s.params, loc=s.loc, reg=s.reg)]
    if isinstance(s, A.Always):
        return [A.Always(_blk(s.body), loc=s.loc)]
    if isinstance(s, A.Try):
        return [A.Try(_blk(s.body), [A.Handler(h.names, _blk(h.body)) for h in s.handlers],
                      loc=s.loc)]
    if isinstance(s, A.WaitFor):
        return [A.WaitFor(fold_expr(s.what), _blk(s.with_stmt), _blk(s.else_stmt), loc=s.loc)]
    if isinstance(s, A.Bind):
        return [A.Bind([fold_expr(x) for x in s.stmts], s.comma_form, loc=s.loc)]
    return [fold_expr(s)]


def _root(t):
    while not isinstance(t, A.Name):
        t = t.base
    return t.id


def _reads_and_pinned(stmts, tm):
    """Names read anywhere, and names that must stay because a call or method writes them."""
    reads, pinned = set(), set()

    def expr_reads(e):
        for n in e.walk():
            if isinstance(n, A.Name):
                reads.add(n.id)

    def target_reads(t):
        while not isinstance(t, A.Name):
            if isinstance(t, A.Index):
                for i in t.index:
                    expr_reads(i)
            elif isinstance(t, A.BitSel):
                expr_reads(t.hi)
            t = t.base

    def visit(ss):
        for s in ss:
            if isinstance(s, A.Assign):
                target_reads(s.target)
                expr_reads(s.value)
            elif isinstance(s, A.Bind):
                visit(s.stmts)
            elif isinstance(s, A.FunCall):
                for a in s.args:
                    expr_reads(a)
                for t in s.targets:
                    target_reads(t)
                    pinned.add(_root(t))
            elif isinstance(s, A.MethodCall):
                reads.add(s.obj.id)
                for a in s.args:
                    if isinstance(a, (A.Name, A.Index)):
                        target_reads(a)
                        pinned.add(_root(a))
            else:
                for c in s.children():
                    if isinstance(c, A.Expr):
                        expr_reads(c)
                    else:
                        visit([c] if not isinstance(c, A.Block) else c.stmts)
    visit(stmts)
    return reads, pinned


def _pure(e, tm):
    for n in e.walk():
        if isinstance(n, A.Name):
            sym = tm.symbols.get(n.id)
            if sym is not None and sym.kind in ("queue", "channel"):
                return False
    return True


def _drop_writes(stmts, dead, tm):
    out = []
    for s in stmts:
        if isinstance(s, A.Assign) and _root(s.target) in dead:
            continue
        if isinstance(s, A.Bind):
            kept = _drop_writes(s.stmts, dead, tm)
            if len(kept) > 1:
                out.append(A.Bind(kept, s.comma_form, loc=s.loc))
            else:
                out.extend(kept)
            continue
        s = copy.copy(s)
        for f in ("then", "orelse", "body", "with_stmt", "else_stmt"):
            b = getattr(s, f, None)
            if isinstance(b, A.Block):
                setattr(s, f, A.Block([], _drop_writes(b.stmts, dead, tm), loc=b.loc))
        if isinstance(s, A.Match):
            s.arms = [A.MatchArm(a.values, A.Block([], _drop_writes(a.body.stmts, dead, tm)))
                      for a in s.arms]
        if isinstance(s, A.Try):
            s.handlers = [A.Handler(h.names, A.Block([], _drop_writes(h.body.stmts, dead, tm)))
                          for h in s.handlers]
        out.append(s)
    return out


def _observed(observe, proc, name):
    if observe == "*":
        return True
    return name in observe or f"{proc}.{name}" in observe


def fold_constants(tm: TypedModule, observe=None) -> TypedModule:
    """Fold constants, prune constant branches and remove objects that are never read.

    observe names locals (``name`` or ``proc.name``, or ``"*"`` for all) whose
    values must survive because a caller inspects them after execution.
    """
    observe = observe if observe is not None else set()
    tm = copy.deepcopy(tm)
    notes = list(tm.notes)
    for p in tm.processes:
        p.body = fold_stmts(p.body)
        while True:
            reads, pinned = _reads_and_pinned(p.body, tm)
            dead = set()
            for name, sym in p.locals.items():
                if sym.kind not in STORAGE + ("array",) or sym.role in ("loop", "exc"):
                    continue
                if name in reads or name in pinned or _observed(observe, p.name, name):
                    continue
                dead.add(name)
            impure = set()
            for s in _all_assigns(p.body):
                if _root(s.target) in dead and not _pure(s.value, tm):
                    impure.add(_root(s.target))
            dead -= impure
            if not dead:
                break
            p.body = _drop_writes(p.body, dead, tm)
            for name in sorted(dead):
                sym = p.locals.pop(name)
                notes.append(Diagnostic("note", f"object '{name}' in process '{p.name}' is "
                                        f"never read and was removed", sym.loc))
    tm.accesses = collect_accesses(tm)
    for name in list(tm.symbols):
        sym = tm.symbols[name]
        if (sym.kind in STORAGE + ("array",) and not sym.exported and sym.role is None
                and name not in tm.accesses and not sym.in_ram
                and not _observed(observe, "", name)):
            del tm.symbols[name]
            notes.append(Diagnostic("note", f"object '{name}' is never used and was removed",
                                    sym.loc))
    tm.notes = notes
    return tm


def _all_assigns(stmts):
    for s in stmts:
        for n in s.walk():
            if isinstance(n, A.Assign):
                yield n
