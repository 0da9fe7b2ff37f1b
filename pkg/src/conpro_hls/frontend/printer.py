"""Pretty printer; its output re-parses to a structurally equal tree."""
from __future__ import annotations

from . import ast as A

UNIT_SEP = " "


def expr_str(e) -> str:
    if isinstance(e, A.Num):
        if e.kind == "bool":
            return "true" if e.value else "false"
        if e.kind == "char":
            c = chr(e.value)
            esc = {"\n": "\\n", "\t": "\\t", "\r": "\\r", "\0": "\\0", "'": "\\'", "\\": "\\\\"}
            return f"'{esc.get(c, c)}'"
        if e.kind == "logic":
            w = e.width or max(1, e.value.bit_length())
            return "0b" + format(e.value, f"0{w}b")
        return str(e.value) if e.value >= 0 else f"(-{-e.value})"
    if isinstance(e, A.Str):
        return '"' + e.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.SelfIndex):
        return "#"
    if isinstance(e, A.Index):
        return f"{expr_str(e.base)}.[{', '.join(expr_str(i) for i in e.index)}]"
    if isinstance(e, A.Field):
        return f"{expr_str(e.base)}.{e.name}"
    if isinstance(e, A.BitSel):
        if e.lo is None:
            return f"{expr_str(e.base)}[{expr_str(e.hi)}]"
        return f"{expr_str(e.base)}[{expr_str(e.hi)} downto {expr_str(e.lo)}]"
    if isinstance(e, A.Unary):
        sep = " " if e.op.isalpha() else ""
        return f"({e.op}{sep}{expr_str(e.operand)})"
    if isinstance(e, A.Binary):
        return f"({expr_str(e.left)} {e.op} {expr_str(e.right)})"
    if isinstance(e, A.Conv):
        if e.func == "auto":
            return expr_str(e.operand)
        return f"{e.func}({expr_str(e.operand)})"
    if isinstance(e, A.Call):
        return f"{e.func}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, A.TimeValue):
        return f"{expr_str(e.amount)} {e.unit}"
    if isinstance(e, A.TupleTarget):
        return "{" + ", ".join(expr_str(i) for i in e.items) + "}"
    raise TypeError(f"cannot print expression {e!r}")


def type_str(t: A.TypeRef) -> str:
    if t.width is None:
        return t.name
    return f"{t.name}[{expr_str(t.width)}]"


def params_str(params) -> str:
    if not params:
        return ""
    parts = []
    for p in params:
        if p.value is None:
            parts.append(p.name)
        else:
            parts.append(f"{p.name}={expr_str(p.value)}")
    return " with " + " and ".join(parts)


class Printer:
    def __init__(self, indent="  "):
        self.ind = indent
        self.lines = []

    def emit(self, depth, text):
        self.lines.append(self.ind * depth + text)

    def stmt(self, s, depth) -> str:
        """Render a statement as text (without trailing ';'), possibly multi-line."""
        pad = self.ind * depth
        if isinstance(s, A.Assign):
            return f"{expr_str(s.target)} <- {expr_str(s.value)}"
        if isinstance(s, A.Bind):
            if s.comma_form:
                return ", ".join(self.stmt(x, depth) for x in s.stmts)
            inner = "".join(f"{pad}{self.ind}{self.stmt(x, depth + 1)};\n" for x in s.stmts)
            return f"begin\n{inner}{pad}end with bind"
        if isinstance(s, A.Block):
            inner = "".join(f"{pad}{self.ind}{self.decl_text(d)}\n" for d in s.decls)
            inner += "".join(f"{pad}{self.ind}{self.stmt(x, depth + 1)};\n" for x in s.stmts)
            return f"begin\n{inner}{pad}end{params_str(s.params)}"
        if isinstance(s, A.If):
            text = f"if {expr_str(s.cond)} then {self.stmt(s.then, depth)}"
            if s.orelse is not None:
                text += f" else {self.stmt(s.orelse, depth)}"
            return text
        if isinstance(s, A.Match):
            out = f"match {expr_str(s.expr)} with begin\n"
            for arm in s.arms:
                if arm.values is None:
                    head = "others"
                else:
                    vals = []
                    for v in arm.values:
                        if isinstance(v, tuple):
                            lo, hi, down = v
                            vals.append(f"{expr_str(lo)} {'downto' if down else 'to'} {expr_str(hi)}")
                        else:
                            vals.append(expr_str(v))
                    head = "when " + ", ".join(vals)
                out += f"{pad}{self.ind}{head}: {self.stmt(arm.body, depth + 1)};\n"
            return out + f"{pad}end"
        if isinstance(s, A.Try):
            out = f"try {self.stmt(s.body, depth)} with begin\n"
            for h in s.handlers:
                head = "others" if h.names is None else "when " + ", ".join(h.names)
                out += f"{pad}{self.ind}{head}: {self.stmt(h.body, depth + 1)};\n"
            return out + f"{pad}end"
        if isinstance(s, A.Raise):
            return f"raise {s.name}"
        if isinstance(s, A.For):
            direction = "downto" if s.downto else "to"
            step = f" step {expr_str(s.step)}" if s.step is not None else ""
            body = self.stmt(s.body, depth)
            if s.params:
                if not isinstance(s.body, A.Block):
                    body = f"begin\n{pad}{self.ind}{body};\n{pad}end"
                body += params_str(s.params)
            return (f"for {s.var} = {expr_str(s.start)} {direction} {expr_str(s.stop)}{step} do "
                    f"{body}")
        if isinstance(s, A.While):
            return f"while {expr_str(s.cond)} do {self.stmt(s.body, depth)}"
        if isinstance(s, A.Always):
            return f"always do {self.stmt(s.body, depth)}"
        if isinstance(s, A.WaitFor):
            text = f"wait for {expr_str(s.what)}"
            if s.with_stmt is not None:
                text += f" with {self.stmt(s.with_stmt, depth)}"
                if s.else_stmt is not None:
                    text += f" else {self.stmt(s.else_stmt, depth)}"
            return text
        if isinstance(s, A.MethodCall):
            return f"{expr_str(s.obj)}.{s.method}({', '.join(expr_str(a) for a in s.args)})"
        if isinstance(s, A.ProcCall):
            return f"{s.name}({', '.join(expr_str(a) for a in s.args)})"
        if isinstance(s, A.FunCall):
            call = f"{s.func}({', '.join(expr_str(a) for a in s.args)})"
            if not s.targets:
                return call
            if len(s.targets) == 1:
                return f"{expr_str(s.targets[0])} <- {call}"
            return "{" + ", ".join(expr_str(t) for t in s.targets) + "} <- " + call
        if isinstance(s, A.Nop):
            return "begin end"
        raise TypeError(f"cannot print statement {s!r}")

    def decl_text(self, d, depth=1) -> str:
        pad = self.ind * (depth - 1)
        if isinstance(d, A.ObjDef):
            names = ", ".join(d.names)
            if d.kind == "block":
                return f"block {names}{params_str(d.params)};"
            if d.kind == "const":
                return f"const {names}: {type_str(d.type)} := {expr_str(d.init)};"
            block = f" in {d.block}" if d.block else ""
            return f"{d.kind} {names}: {type_str(d.type)}{block}{params_str(d.params)};"
        if isinstance(d, A.AbstractDef):
            return f"object {', '.join(d.names)}: {d.otype}{params_str(d.params)};"
        if isinstance(d, A.ArrayDef):
            dims = ", ".join(expr_str(x) for x in d.dims)
            names = ", ".join(d.names)
            if d.kind == "object":
                return f"array {names}: object {d.otype}[{dims}]{params_str(d.params)};"
            block = f" in {d.block}" if d.block else ""
            return (f"array {names}: {d.kind}[{dims}] of {type_str(d.type)}{block}"
                    f"{params_str(d.params)};")
        if isinstance(d, A.ExceptionDef):
            return f"exception {', '.join(d.names)};"
        if isinstance(d, A.ComponentDef):
            return f"component {', '.join(d.names)}: {d.type};"
        if isinstance(d, A.TypeDef):
            if d.kind == "enum":
                body = " ".join(f"{n};" for n in d.items)
            else:
                parts = []
                for f in d.items:
                    if d.kind == "component":
                        parts.append(f"port {f.name}: {f.direction} {type_str(f.type)};")
                    elif d.kind == "bits":
                        if isinstance(f.width, tuple):
                            hi, lo, down = f.width
                            parts.append(f"{f.name}: {expr_str(hi)} {'downto' if down else 'to'} "
                                         f"{expr_str(lo)};")
                        else:
                            parts.append(f"{f.name}: {expr_str(f.width)};")
                    else:
                        parts.append(f"{f.name}: {type_str(f.type)};")
                body = " ".join(parts)
            return f"type {d.name}: {{ {body} }}{params_str(d.params)};"
        if isinstance(d, A.Open):
            return f"open {d.name};"
        if isinstance(d, A.Export):
            return f"export {', '.join(d.names)};"
        if isinstance(d, A.ProcessDef):
            inner = "".join(f"{pad}  {self.decl_text(x, depth + 1)}\n" for x in d.decls)
            inner += "".join(f"{pad}  {self.stmt(s, depth)};\n" for s in d.body)
            if d.size is not None:
                head = f"array {d.name}: process[{expr_str(d.size)}] of"
            else:
                head = f"process {d.name}:"
            return f"{head}\n{pad}begin\n{inner}{pad}end{params_str(d.params)};"
        if isinstance(d, A.FunctionDef):
            def formals(fs):
                return ", ".join(f.name + (f": {type_str(f.type)}" if f.type else "") for f in fs)
            ret = f" return ({formals(d.rets)})" if d.rets else ""
            inner = "".join(f"{pad}  {self.decl_text(x, depth + 1)}\n" for x in d.decls)
            inner += "".join(f"{pad}  {self.stmt(s, depth)};\n" for s in d.body)
            return (f"function {d.name}({formals(d.args)}){ret}:\n{pad}begin\n{inner}{pad}end"
                    f"{params_str(d.params)};")
        if isinstance(d, A.TopStmt):
            return f"{self.stmt(d.stmt, depth - 1)};"
        raise TypeError(f"cannot print declaration {d!r}")


def print_module(m: A.Module) -> str:
    p = Printer()
    return "\n".join(p.decl_text(d) for d in m.decls) + ("\n" if m.decls else "")


def print_stmts(stmts, depth=0) -> str:
    p = Printer()
    return "".join(p.ind * depth + p.stmt(s, depth) + ";\n" for s in stmts)
