"""Recursive-descent parser producing an untyped syntax tree."""
from __future__ import annotations

from ..diagnostics import CompileError, Diagnostic
from . import ast as A
from .lexer import FREQ_UNITS, TIME_UNITS, tokenize

CONVERSIONS = ("to_int", "to_logic", "to_char", "to_bool")
UNITS = set(TIME_UNITS) | set(FREQ_UNITS)

# lowest precedence first
BINARY_LEVELS = (
    ("and", "xor", "or"),
    ("land", "lxor", "lor"),
    ("<", "<=", ">", ">=", "=", "<>"),
    ("@",),
    ("lsl", "lsr"),
    ("+", "-"),
    ("*", "/", "%"),
    ("~",),
)

STORAGE_KINDS = ("reg", "var", "sig", "queue", "channel")
DECL_STARTS = ("reg", "var", "sig", "const", "queue", "channel", "block", "object",
               "array", "type", "exception", "component")


class ParseError(CompileError):
    pass


class Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    # ------------------------------------------------------------ utilities

    @property
    def tok(self):
        return self.toks[self.i]

    def peek(self, k=1):
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def at(self, *texts):
        t = self.tok
        return t.kind in ("keyword", "operator", "punctuation") and t.text in texts

    def at_ident(self):
        return self.tok.kind == "identifier"

    def next(self):
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, expected, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        if isinstance(expected, str):
            msg = f"syntax error: expected {expected}, found {found}"
        else:
            msg = f"syntax error: expected one of {', '.join(sorted(expected))}, found {found}"
        raise ParseError(Diagnostic("error", msg, tok.loc))

    def expect(self, *texts):
        if not self.at(*texts):
            self.fail(texts[0] if len(texts) == 1 else set(texts))
        return self.next()

    def accept(self, *texts):
        if self.at(*texts):
            return self.next()
        return None

    def ident(self):
        if not self.at_ident():
            self.fail("identifier")
        return self.next().text

    def dotted_ident(self):
        name = self.ident()
        while self.at(".") and self.peek().kind == "identifier":
            self.next()
            name += "." + self.next().text
        return name

    def ident_list(self):
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return names

    # ----------------------------------------------------------- top level

    def module(self):
        decls = []
        while self.tok.kind != "eof":
            if self.accept(";"):
                continue
            decls.append(self.top_decl())
        return A.Module(decls)

    def top_decl(self):
        t = self.tok
        if self.at("module"):
            raise ParseError(Diagnostic(
                "error", "structural compound modules are out of scope for this compiler", t.loc))
        if self.at("include"):
            raise ParseError(Diagnostic(
                "error", "include must be resolved by the driver before parsing", t.loc))
        if self.at("open"):
            self.next()
            name = self.dotted_ident()
            self.expect(";")
            return A.Open(name, loc=t.loc)
        if self.at("export"):
            self.next()
            names = self.ident_list()
            self.expect(";")
            return A.Export(names, loc=t.loc)
        if self.at("process"):
            return self.process_def()
        if self.at("function"):
            return self.function_def()
        if self.at(*DECL_STARTS):
            return self.decl()
        stmt = self.statement()
        self.expect(";")
        return A.TopStmt(stmt, loc=t.loc)

    def with_params(self):
        """Optional `with p=v and q=v` list; `with begin` belongs to try and is left alone."""
        if not self.at("with") or self.peek().text == "begin":
            return []
        self.next()
        params = [self.param()]
        while self.accept("and"):
            params.append(self.param())
        return params

    def param(self):
        if self.at("bind", "inline", "unroll") or self.at_ident() or self.tok.kind == "keyword":
            name = self.next().text
            while self.at(".") and self.peek().kind in ("identifier", "keyword"):
                self.next()
                name += "." + self.next().text
        else:
            self.fail("parameter name")
        if self.accept("="):
            if self.tok.kind in ("identifier",) and self.peek().text not in ("(",):
                value = A.Name(self.next().text, loc=self.toks[self.i - 1].loc)
            else:
                value = self.expr(3)  # stop before `and`, which separates parameters
            return A.Param(name, value)
        return A.Param(name, None)

    def type_ref(self):
        t = self.tok
        if self.at("int", "logic", "bool", "char", "value"):
            name = self.next().text
        else:
            name = self.ident()
        width = None
        if self.accept("["):
            width = self.expr()
            self.expect("]")
        return A.TypeRef(name, width, loc=t.loc)

    def decl(self):
        t = self.tok
        kind = self.next().text
        if kind in STORAGE_KINDS:
            names = self.ident_list()
            self.expect(":")
            ty = self.type_ref()
            block = None
            if self.accept("in"):
                block = self.ident()
            params = self.with_params()
            self.expect(";")
            return A.ObjDef(kind, names, ty, block=block, params=params, loc=t.loc)
        if kind == "const":
            names = self.ident_list()
            self.expect(":")
            ty = self.type_ref()
            self.expect(":=")
            init = self.expr()
            self.expect(";")
            return A.ObjDef("const", names, ty, init=init, loc=t.loc)
        if kind == "block":
            names = self.ident_list()
            params = self.with_params()
            self.expect(";")
            return A.ObjDef("block", names, params=params, loc=t.loc)
        if kind == "object":
            names = self.ident_list()
            self.expect(":")
            otype = self.dotted_ident()
            params = self.with_params()
            self.expect(";")
            return A.AbstractDef(names, otype, params, loc=t.loc)
        if kind == "exception":
            names = self.ident_list()
            self.expect(";")
            return A.ExceptionDef(names, loc=t.loc)
        if kind == "component":
            names = self.ident_list()
            self.expect(":")
            ctype = self.ident()
            self.expect(";")
            return A.ComponentDef(names, ctype, loc=t.loc)
        if kind == "type":
            return self.type_def(t)
        if kind == "array":
            return self.array_def(t)
        self.fail("declaration", t)

    def type_def(self, t):
        name = self.ident()
        self.expect(":")
        self.expect("{")
        items = []
        first, second = self.tok, self.peek()
        if first.kind == "identifier" and second.text in (";", ",", "}"):
            kind = "enum"
            while not self.at("}"):
                items.append(self.ident())
                if not self.accept(";", ","):
                    break
        else:
            kind = None
            while not self.at("}"):
                is_port = bool(self.accept("port"))
                fname = self.ident()
                self.expect(":")
                if is_port or self.at("input", "output", "inout"):
                    direction = self.expect("input", "output", "inout").text
                    items.append(A.StructField(fname, self.type_ref(), direction=direction))
                    kind = "component"
                elif self.tok.kind == "integer-literal":
                    hi = self.expr()
                    if self.at("to", "downto"):
                        downto = self.next().text == "downto"
                        lo = self.expr()
                        items.append(A.StructField(fname, width=(hi, lo, downto)))
                    else:
                        items.append(A.StructField(fname, width=hi))
                    kind = kind or "bits"
                else:
                    items.append(A.StructField(fname, self.type_ref()))
                    kind = kind or "struct"
                self.expect(";")
            kind = kind or "struct"
        self.expect("}")
        params = self.with_params()
        self.expect(";")
        return A.TypeDef(name, kind, items, params, loc=t.loc)

    def array_def(self, t):
        names = self.ident_list()
        self.expect(":")
        if self.accept("process"):
            self.expect("[")
            size = self.expr()
            self.expect("]")
            self.expect("of")
            decls, body = self.body()
            params = self.with_params()
            self.expect(";")
            if len(names) != 1:
                self.fail("a single process array name", t)
            return A.ProcessDef(names[0], decls, body, params, size=size, loc=t.loc)
        if self.accept("object"):
            otype = self.dotted_ident()
            dims = self.dims()
            params = self.with_params()
            self.expect(";")
            return A.ArrayDef(names, "object", dims, otype=otype, params=params, loc=t.loc)
        kind = self.expect(*STORAGE_KINDS).text
        dims = self.dims()
        self.expect("of")
        ty = self.type_ref()
        block = None
        if self.accept("in"):
            block = self.ident()
        params = self.with_params()
        self.expect(";")
        return A.ArrayDef(names, kind, dims, type=ty, block=block, params=params, loc=t.loc)

    def dims(self):
        self.expect("[")
        dims = [self.expr()]
        while self.accept(","):
            dims.append(self.expr())
        self.expect("]")
        return dims

    def body(self):
        self.expect("begin")
        decls = []
        while self.at(*DECL_STARTS):
            decls.append(self.decl())
        stmts = self.stmt_list()
        self.expect("end")
        return decls, stmts

    def process_def(self):
        t = self.next()
        name = self.ident()
        self.accept(":")
        decls, body = self.body()
        params = self.with_params()
        self.expect(";")
        return A.ProcessDef(name, decls, body, params, loc=t.loc)

    def formals(self):
        out = []
        self.expect("(")
        if not self.at(")"):
            while True:
                n = self.ident()
                ty = None
                if self.accept(":"):
                    ty = self.type_ref()
                out.append(A.FormalParam(n, ty))
                if not self.accept(","):
                    break
        self.expect(")")
        return out

    def function_def(self):
        t = self.next()
        name = self.ident()
        args = self.formals()
        rets = []
        if self.accept("return"):
            rets = self.formals()
        self.expect(":")
        decls, body = self.body()
        params = self.with_params()
        self.expect(";")
        return A.FunctionDef(name, args, rets, decls, body, params, loc=t.loc)

    # ----------------------------------------------------------- statements

    def stmt_list(self):
        stmts = []
        while not self.at("end") and self.tok.kind != "eof":
            if self.accept(";"):
                continue
            stmts.append(self.statement())
            if not self.at("end"):
                self.expect(";")
        return stmts

    def block_stmt(self):
        t = self.tok
        decls, stmts = self.body()
        params = self.with_params()
        if A.param_value(params, "bind"):
            others = [p for p in params if p.name != "bind"]
            if decls or others:
                self.fail("only assignments in a bound block", t)
            for s in stmts:
                if not isinstance(s, A.Assign):
                    raise ParseError(Diagnostic(
                        "error", "a bound block may contain only assignments", t.loc))
            return A.Bind(stmts, comma_form=False, loc=t.loc)
        return A.Block(decls, stmts, params, loc=t.loc)

    def statement(self):
        t = self.tok
        if self.at("begin"):
            return self.block_stmt()
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            then = self.statement()
            orelse = None
            if self.accept("else"):
                orelse = self.statement()
            return A.If(cond, then, orelse, loc=t.loc)
        if self.accept("match"):
            e = self.expr()
            self.expect("with")
            self.expect("begin")
            arms = []
            while not self.at("end"):
                if self.accept(";"):
                    continue
                if self.accept("others") or (self.at("when") and self.peek().text == "others"
                                             and (self.next() and self.next())):
                    values = None
                else:
                    self.expect("when")
                    values = self.match_values()
                self.expect(":")
                body = self.statement()
                self.expect(";")
                arms.append(A.MatchArm(values, body))
            self.expect("end")
            if not arms:
                self.fail("at least one match arm", t)
            for k, arm in enumerate(arms):
                if arm.values is None and k != len(arms) - 1:
                    raise ParseError(Diagnostic("error", "`others` must be the last match arm", t.loc))
            return A.Match(e, arms, loc=t.loc)
        if self.accept("try"):
            body = self.statement()
            self.expect("with")
            self.expect("begin")
            handlers = []
            while not self.at("end"):
                if self.accept(";"):
                    continue
                if self.accept("others") or (self.at("when") and self.peek().text == "others"
                                             and (self.next() and self.next())):
                    names = None
                else:
                    self.expect("when")
                    names = self.ident_list()
                self.expect(":")
                hbody = self.statement()
                self.expect(";")
                handlers.append(A.Handler(names, hbody))
            self.expect("end")
            return A.Try(body, handlers, loc=t.loc)
        if self.accept("raise"):
            return A.Raise(self.ident(), loc=t.loc)
        if self.accept("for"):
            var = self.ident()
            self.expect("=")
            start = self.expr()
            downto = self.expect("to", "downto").text == "downto"
            stop = self.expr()
            step = None
            if self.accept("step"):
                step = self.expr()
            self.expect("do")
            body = self.statement()
            params = []
            if isinstance(body, A.Block) and body.params:
                params, body.params = body.params, []
            return A.For(var, start, stop, body, downto, step, params, loc=t.loc)
        if self.accept("while"):
            cond = self.expr()
            self.expect("do")
            return A.While(cond, self.statement(), loc=t.loc)
        if self.accept("always"):
            self.expect("do")
            return A.Always(self.statement(), loc=t.loc)
        if self.accept("wait"):
            self.expect("for")
            what = self.expr()
            with_stmt = else_stmt = None
            if self.at("with") and self.peek().text != "begin":
                self.next()
                with_stmt = self.statement()
                if self.at(";") and self.peek().text == "else":
                    self.next()
                if self.accept("else"):
                    else_stmt = self.statement()
            return A.WaitFor(what, with_stmt, else_stmt, loc=t.loc)
        return self.simple_statement()

    def match_values(self):
        values = []
        while True:
            v = self.expr()
            if self.at("to", "downto"):
                downto = self.next().text == "downto"
                v = (v, self.expr(), downto)
            values.append(v)
            if not self.accept(","):
                return values

    def simple_statement(self):
        t = self.tok
        if self.at("{"):
            self.next()
            items = [self.postfix()]
            while self.accept(","):
                items.append(self.postfix())
            self.expect("}")
            target = A.TupleTarget(items, loc=t.loc)
            self.expect("<-")
            return A.Assign(target, self.expr(), loc=t.loc)
        if not self.at_ident():
            self.fail("statement")
        target = self.postfix(allow_method=True)
        if isinstance(target, A.MethodCall):
            return target
        if self.accept("<-"):
            first = A.Assign(target, self.expr(), loc=t.loc)
            if not self.at(","):
                return first
            stmts = [first]
            while self.accept(","):
                s = self.tok
                lhs = self.postfix()
                self.expect("<-")
                stmts.append(A.Assign(lhs, self.expr(), loc=s.loc))
            return A.Bind(stmts, comma_form=True, loc=t.loc)
        if isinstance(target, A.Call):
            return A.ProcCall(target.func, target.args, loc=t.loc)
        if isinstance(target, A.Name):
            return A.ProcCall(target.id, [], loc=t.loc)
        self.fail("'<-' or a method call")

    # ---------------------------------------------------------- expressions

    def expr(self, level=0):
        if level == len(BINARY_LEVELS):
            return self.unary()
        ops = BINARY_LEVELS[level]
        left = self.expr(level + 1)
        while self.at(*ops):
            t = self.next()
            right = self.expr(level + 1)
            left = A.Binary(t.text, left, right, loc=t.loc)
        return left

    def unary(self):
        t = self.tok
        if self.at("-", "not", "lnot"):
            self.next()
            return A.Unary(t.text, self.unary(), loc=t.loc)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "integer-literal":
            self.next()
            num = A.Num(t.value, "int", loc=t.loc)
            if self.tok.kind == "keyword" and self.tok.text in UNITS:
                return A.TimeValue(num, self.next().text, loc=t.loc)
            return num
        if t.kind == "logic-literal":
            self.next()
            return A.Num(t.value, "logic", t.width, loc=t.loc)
        if t.kind == "char-literal":
            self.next()
            return A.Num(t.value, "char", loc=t.loc)
        if t.kind == "string-literal":
            self.next()
            return A.Str(t.value, loc=t.loc)
        if self.at("true", "false"):
            self.next()
            return A.Num(1 if t.value else 0, "bool", loc=t.loc)
        if self.at("#"):
            self.next()
            return A.SelfIndex(loc=t.loc)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.at_ident():
            return self.postfix()
        self.fail("expression")

    def postfix(self, allow_method=False):
        t = self.tok
        if not self.at_ident():
            self.fail("identifier")
        node = A.Name(self.next().text, loc=t.loc)
        while True:
            if self.at("."):
                nt = self.peek()
                if nt.text == "[":
                    self.next()
                    self.next()
                    idx = [self.expr()]
                    while self.accept(","):
                        idx.append(self.expr())
                    self.expect("]")
                    node = A.Index(node, idx, loc=t.loc)
                    continue
                if nt.kind in ("identifier", "keyword"):
                    self.next()
                    fname = self.next().text
                    if self.at("("):
                        if not allow_method:
                            self.fail("expression (method calls are statements)")
                        args = self.args()
                        return A.MethodCall(node, fname, args, loc=t.loc)
                    node = A.Field(node, fname, loc=t.loc)
                    continue
                self.fail("field name or '['")
            if self.at("["):
                self.next()
                hi = self.expr()
                lo = None
                if self.at("to", "downto"):
                    downto = self.next().text == "downto"
                    lo = self.expr()
                    if not downto:
                        hi, lo = lo, hi
                self.expect("]")
                node = A.BitSel(node, hi, lo, loc=t.loc)
                continue
            if self.at("(") and isinstance(node, A.Name):
                args = self.args()
                if node.id in CONVERSIONS:
                    if len(args) != 1:
                        self.fail("one conversion argument", t)
                    node = A.Conv(node.id, args[0], loc=t.loc)
                else:
                    node = A.Call(node.id, args, loc=t.loc)
                continue
            return node

    def args(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.expr())
            while self.accept(","):
                out.append(self.expr())
        self.expect(")")
        return out


def parse_module(tokens, name="main") -> A.Module:
    """Parse a token stream from tokenize() into a module node."""
    m = Parser(tokens).module()
    m.name = name
    return m


def parse_source(source: str, filename: str = "<input>", name: str | None = None) -> A.Module:
    if name is None:
        base = filename.rsplit("/", 1)[-1]
        name = base.rsplit(".", 1)[0] if base and not base.startswith("<") else "main"
    return parse_module(tokenize(source, filename), name)
