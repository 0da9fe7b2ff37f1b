"""Reference-stack optimizer: delayed (ALAP) assignment of process-local registers.

Assignments to local registers are not emitted where they appear. Each register
keeps a stack of symbolic versions; reads of a register inside later expressions
refer to its current version. Pending assignments are written back (flushed) in
dependency order when a barrier is reached: a statement touching anything other
than local registers, the end of a block, or a branch or loop that uses them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .frontend import ast as A
from .sema.analyzer import typed_num
from .sema.folding import fold_expr
from .sema.types import INT, LOGIC, wrap

MAX_EXPR_OPS = 32


# ------------------------------------------------------------ stack elements

@dataclass
class RSSelf:
    obj: str

    def __str__(self):
        return f"RS_self({self.obj})"


@dataclass
class RSExpr:
    expr: object
    version: int = 0

    def __str__(self):
        from .frontend.printer import expr_str
        return f"RS_expr({expr_str(_plain(self.expr))})"


@dataclass
class RSBranch:
    stacks: list  # one sub-stack per conditional block

    def __str__(self):
        inner = "; ".join("[" + ", ".join(str(e) for e in reversed(s)) + "]" for s in self.stacks)
        return f"RS_branch({inner})"


@dataclass
class RSLoop:
    stack: list

    def __str__(self):
        return "RS_loop([" + ", ".join(str(e) for e in reversed(self.stack)) + "])"


@dataclass
class RSRef:
    target: object

    def __str__(self):
        return f"RS_ref({self.target})"


@dataclass
class Ref(A.Expr):
    """Read of a symbolic version of a register inside a pending expression."""
    obj: str
    version: int
    ty: object = None


@dataclass
class Kept(A.Name):
    """Read of a register that is flushed earlier in the same write-back."""


# ------------------------------------------------------------------ helpers

def _plain(e):
    """Expression with references shown as versioned names (x0, x1, ...)."""
    return A.map_exprs(e, lambda n: A.Name(f"{n.obj}{n.version}", ty=n.ty)
                       if isinstance(n, Ref) else None)


def _ops(e):
    return sum(1 for n in e.walk() if isinstance(n, (A.Binary, A.Unary)))


def names_read(node):
    out = set()
    for n in node.walk():
        if isinstance(n, A.Name):
            out.add(n.id)
    return out


def _targets(s):
    """Names possibly written by a statement (nested statements included)."""
    out = set()
    for n in s.walk():
        if isinstance(n, A.Assign):
            t = n.target
            while not isinstance(t, A.Name):
                t = t.base
            out.add(t.id)
        elif isinstance(n, A.FunCall):
            for t in n.targets:
                while not isinstance(t, A.Name):
                    t = t.base
                out.add(t.id)
        elif isinstance(n, A.MethodCall):
            for a in n.args:
                if isinstance(a, A.Name):
                    out.add(a.id)
        elif isinstance(n, A.For):
            out.add(n.reg)
    return out


def linearize(e):
    """Normalize +/- chains of one type: terms in source order, constants summed last."""
    def fn(n):
        if not (isinstance(n, A.Binary) and n.op in ("+", "-")) or n.ty is None:
            return None
        if n.ty.base not in (INT, LOGIC):
            return None
        terms, k = [], 0

        def walk(x, sign):
            nonlocal k
            if isinstance(x, A.Binary) and x.op in ("+", "-") and x.ty == n.ty:
                walk(x.left, sign)
                walk(x.right, sign if x.op == "+" else -sign)
            elif isinstance(x, A.Num) and x.ty == n.ty:
                k += sign * x.value
            else:
                terms.append((sign, x))
        walk(n, 1)
        k = wrap(k, n.ty)
        return _rebuild(terms, k, n.ty, n.loc)
    return A.map_exprs(e, fn)


def _num(v, ty):
    return typed_num(v, ty)


def _rebuild(terms, k, ty, loc):
    if not terms:
        return _num(k, ty)
    pos = [t for s, t in terms if s > 0]
    acc = None
    rest = list(terms)
    if pos:
        first = next(i for i, (s, _) in enumerate(terms) if s > 0)
        acc = terms[first][1]
        del rest[first]
    else:
        acc = A.Unary("-", terms[0][1], ty=ty)
        rest = rest[1:]
    for s, t in rest:
        acc = A.Binary("+" if s > 0 else "-", acc, t, ty=ty, loc=loc)
    if k:
        if ty.base == INT and k < 0 and ty.fits(-k):
            acc = A.Binary("-", acc, _num(-k, ty), ty=ty, loc=loc)
        elif ty.base == LOGIC and k >= 1 << (ty.width - 1):
            acc = A.Binary("-", acc, _num((1 << ty.width) - k, ty), ty=ty, loc=loc)
        else:
            acc = A.Binary("+", acc, _num(k, ty), ty=ty, loc=loc)
    return acc


def simplify(e):
    return fold_expr(linearize(fold_expr(e)))


# -------------------------------------------------------------------- state

@dataclass
class ReferenceStackState:
    """Stacks (index 0 oldest) and pending versions of the tracked registers."""
    types: dict  # tracked register -> DataType
    stacks: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)  # obj -> list of version expressions
    pending: dict = field(default_factory=dict)  # obj -> index of its pending version
    first: dict = field(default_factory=dict)  # obj -> order of first assignment
    stored: dict = field(default_factory=dict)  # obj -> version held by the register
    dumps: list | None = None

    def tracked(self, name):
        return name in self.types

    def stack(self, name):
        return self.stacks.setdefault(name, [RSSelf(name)])

    def read(self, name, ty):
        """Expression for a read of name at this point (step 6)."""
        if name in self.pending:
            return Ref(name, self.pending[name], ty=self.types[name])
        self.stack(name)
        return A.Name(name, ty=ty)

    def assign(self, name, expr):
        vs = self.versions.setdefault(name, [])
        vs.append(expr)
        k = len(vs) - 1
        self.pending[name] = k
        self.first.setdefault(name, len(self.first))
        st = self.stacks.setdefault(name, [])
        st.append(RSExpr(expr, k))

    def expand(self, e, keep=lambda obj, k: False, kept=None, seen=None):
        """Inline every reference except those keep() relocates to the register itself.

        kept collects the relocated registers, seen every (register, version) met.
        """
        def fn(n):
            if not isinstance(n, Ref):
                return None
            if seen is not None:
                seen.append((n.obj, n.version))
            if keep(n.obj, n.version):
                if kept is not None:
                    kept.add(n.obj)
                return Kept(n.obj, ty=self.types[n.obj])
            inner = self.expand(self.versions[n.obj][n.version], keep, kept, seen)
            if inner.ty != self.types[n.obj]:
                inner = A.Conv("auto", inner, ty=self.types[n.obj])
            return inner
        return A.map_exprs(e, fn)

    def base_reads(self, e):
        """Registers whose stored value the fully expanded expression reads."""
        out = set()
        for n in e.walk():
            if isinstance(n, A.Name) and not isinstance(n, Kept) and n.id in self.types:
                out.add(n.id)
            elif isinstance(n, Ref):
                out |= self.base_reads(self.versions[n.obj][n.version])
        return out

    def snapshot(self, kind):
        if self.dumps is None:
            return
        self.dumps.append(f"-- flush at {kind}")
        for name in sorted(self.stacks, key=lambda x: (self.first.get(x, 1 << 30), x)):
            st = self.stacks[name]
            self.dumps.append(f"{name}: " + ", ".join(str(e) for e in reversed(st)))

    def reset(self, names):
        for name in names:
            self.pending.pop(name, None)
            self.stacks[name] = [RSSelf(name)]


def _refs(e):
    return [(n.obj, n.version) for n in e.walk() if isinstance(n, Ref)]


def flush(state: ReferenceStackState, kind="block-end", live=None, only=None):
    """Write back pending assignments in dependency order; returns the statements.

    live: registers whose value is still needed afterwards (None = all); others
    are dropped. only: restrict to these registers (closed over dependencies).
    """
    state.snapshot(kind)
    names = list(state.pending) if only is None else [n for n in state.pending if n in only]
    if only is not None:
        # a register whose pending value reads the stored value of a flushed one must go too
        changed = True
        while changed:
            changed = False
            for z in state.pending:
                if z not in names and state.base_reads(state.versions[z][state.pending[z]]) & (
                        set(names) | set(only)):
                    names.append(z)
                    changed = True
    names.sort(key=lambda n: state.first.get(n, 0))
    dead = {n for n in names if live is not None and n not in live}
    emit = [n for n in names if n not in dead]
    final = {n: state.pending[n] for n in emit}

    def const_version(obj, k):
        v = simplify(state.expand(state.versions[obj][k]))
        return isinstance(v, A.Num)

    noreloc = set()
    while True:
        def keep(z):
            def k(obj, ver):
                if z in noreloc or const_version(obj, ver):
                    return False
                if final.get(obj) == ver:
                    return True
                return obj not in state.pending and state.stored.get(obj) == ver
            return k
        hard = {n: set() for n in emit}
        soft = {n: set() for n in emit}
        exprs = {}
        for z in emit:
            kept, seen = set(), []
            expanded = state.expand(state.versions[z][final[z]], keep(z), kept, seen)
            for obj, ver in seen:
                if obj in final and obj != z:
                    if final[obj] == ver:
                        soft[obj].add(z)
                    else:
                        soft[z].add(obj)
            for w in kept:
                if w in final and w != z:
                    hard[w].add(z)
            for w in state.base_reads(expanded):
                if w in final and w != z:
                    hard[z].add(w)
            exprs[z] = expanded
        sccs = _sccs(emit, hard)
        bad = [c for c in sccs if len(c) > 1 and any(z not in noreloc for z in c)]
        if not bad:
            break
        for c in bad:
            noreloc |= set(c)
    order = _order(emit, hard, soft, sccs)
    out = []
    for group in order:
        stmts = []
        for z in group:
            ty = state.types[z]
            value = A.map_exprs(exprs[z], lambda n: A.Name(n.id, ty=n.ty) if isinstance(n, Kept) else None)
            stmts.append(A.Assign(A.Name(z, ty=ty), simplify(value)))
        if len(stmts) == 1:
            out.append(stmts[0])
        else:
            out.append(A.Bind(stmts, True))
    for z in emit:
        state.stored[z] = final[z]
    for z in dead:
        state.stored.pop(z, None)
    state.reset(names)
    return out


def _sccs(nodes, edges):
    index, low, onstack, stack, out = {}, {}, set(), [], []
    counter = [0]

    def visit(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        onstack.add(v)
        for w in sorted(edges[v], key=nodes.index):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in onstack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                onstack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp, key=nodes.index))
    for v in nodes:
        if v not in index:
            visit(v)
    return out


def _order(nodes, hard, soft, sccs):
    """Groups in emission order: reverse DFS postorder, soft edges honored when acyclic."""
    comp_of = {v: i for i, c in enumerate(sccs) for v in c}

    def topo(edge_sets):
        seen, post = set(), []

        def dfs(c):
            seen.add(c)
            succ = set()
            for v in sccs[c]:
                for es in edge_sets:
                    for w in es[v]:
                        if comp_of[w] != c:
                            succ.add(comp_of[w])
            for d in sorted(succ, key=lambda d: nodes.index(sccs[d][0])):
                if d not in seen:
                    dfs(d)
            post.append(c)
        for v in nodes:
            if comp_of[v] not in seen:
                dfs(comp_of[v])
        return list(reversed(post))

    order = topo([hard, soft])
    pos = {c: i for i, c in enumerate(order)}
    ok = all(pos[comp_of[v]] < pos[comp_of[w]] for v in nodes for w in hard[v]
             if comp_of[v] != comp_of[w])
    if not ok:
        order = topo([hard])
    return [sccs[c] for c in order]


# ---------------------------------------------------------------- optimizer

class Optimizer:
    def __init__(self, tracked_types, live_out=None, dump=None):
        self.types = tracked_types
        self.live_out = live_out  # None: every register observable at the end
        self.dumps = dump

    def new_state(self):
        return ReferenceStackState(self.types, dumps=self.dumps)

    def live(self, later):
        if self.live_out is None:
            return None
        return later | set(self.live_out)

    def block(self, stmts, cont):
        """Optimize a statement list; cont = registers read after the list (None = all)."""
        st = self.new_state()
        out = []
        reads_after = [set() for _ in stmts]
        acc = set()
        for i in range(len(stmts) - 1, -1, -1):
            reads_after[i] = set(acc)
            acc |= names_read(stmts[i])

        def later(i):
            if cont is None:
                return None
            return reads_after[i] | cont

        for i, s in enumerate(stmts):
            if self.delayable(s):
                self.delay(st, s, out, later(i))
                continue
            if isinstance(s, (A.If, A.Match, A.For, A.While, A.Always, A.Try)):
                involved = (names_read(s) | _targets(s)) & set(self.types)
                live = None if later(i) is None else later(i) | names_read(s)
                out.extend(flush(st, _kind(s), live, only=involved | _targets(s)))
                out.append(self.compound(s, later(i)))
                self.after_compound(st, s)
                continue
            live = None if later(i) is None else later(i) | names_read(s)
            out.extend(flush(st, "guarded-access", live))
            out.append(s)
            st.stored = {}
            for t in _targets(s):
                st.stored.pop(t, None)
        out.extend(flush(st, "block-end", cont))
        return out

    def delayable(self, s):
        if not isinstance(s, A.Assign) or not isinstance(s.target, A.Name):
            return False
        if s.target.id not in self.types:
            return False
        for n in s.value.walk():
            if isinstance(n, A.Name) and n.id not in self.types:
                return False
            if isinstance(n, (A.Index, A.Call)):
                return False
        return True

    def delay(self, st, s, out, later):
        e = A.map_exprs(s.value, lambda n: st.read(n.id, n.ty) if isinstance(n, A.Name) else None)
        if _ops(st.expand(e)) > MAX_EXPR_OPS:
            live = None if later is None else later | names_read(s)
            out.extend(flush(st, "block-end", live))
            e = s.value
        st.assign(s.target.id, e)

    def after_compound(self, st, s):
        touched = _targets(s) & set(self.types)
        for name in touched:
            st.stored.pop(name, None)
            st.stacks[name] = [RSSelf(name)]
        ks = names_read(s) & set(self.types)
        for name in ks - touched:
            stk = st.stack(name)
            stk.append(RSRef(stk[-1]))

    def sub(self, blk, cont):
        if blk is None:
            return None
        return A.Block([], self.block(blk.stmts, cont), loc=blk.loc)

    def compound(self, s, later):
        if isinstance(s, A.If):
            return A.If(s.cond, self.sub(s.then, later), self.sub(s.orelse, later), loc=s.loc)
        if isinstance(s, A.Match):
            arms = [A.MatchArm(a.values, self.sub(a.body, later)) for a in s.arms]
            return A.Match(s.expr, arms, loc=s.loc)
        loop_cont = None if later is None else later | names_read(s)
        if isinstance(s, A.For):
            return A.For(s.var, s.start, s.stop, self.sub(s.body, loop_cont), s.downto, s.step,
                         s.params, loc=s.loc, reg=s.reg)
        if isinstance(s, A.While):
            return A.While(s.cond, self.sub(s.body, loop_cont), loc=s.loc)
        if isinstance(s, A.Always):
            return A.Always(self.sub(s.body, loop_cont), loc=s.loc)
        if isinstance(s, A.Try):
            cont = None if later is None else later | names_read(s)
            return A.Try(self.sub(s.body, cont),
                         [A.Handler(h.names, self.sub(h.body, later)) for h in s.handlers],
                         loc=s.loc)
        raise AssertionError(type(s))


def _kind(s):
    if isinstance(s, (A.For, A.While, A.Always)):
        return "loop"
    return "branch"


def tracked_registers(tm, proc):
    """Process-local plain registers: the objects the optimizer may delay."""
    info = tm.process(proc) if isinstance(proc, str) else proc
    return {n: s.type for n, s in info.locals.items()
            if s.kind == "reg" and s.role not in ("exc",)}


def optimize_process(body, tracked=None, live_out=None, dump=None):
    """Optimize a typed process body.

    tracked maps register name -> DataType; when omitted every Name assigned as a
    whole in the body with a uniform type is tracked (useful for standalone blocks).
    live_out lists registers read after the body (None = all of them); dump, when a
    list, receives the stack contents at every flush.
    """
    if tracked is None:
        tracked = _guess_tracked(body)
    return Optimizer(tracked, live_out, dump).block(list(body), None if live_out is None
                                                   else set(live_out))


def _guess_tracked(body):
    types = {}
    for s in body:
        for n in s.walk():
            if isinstance(n, A.Name) and n.ty is not None:
                types.setdefault(n.id, n.ty)
    return types


def optimize_module(tm, dump=None):
    """Apply the optimizer to every process of a typed module, in place."""
    for p in tm.processes:
        if dump is not None:
            dump.append(f"== process {p.name}")
        p.body = optimize_process(p.body, tracked_registers(tm, p), None, dump)
    return tm
