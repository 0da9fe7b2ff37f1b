"""Assembler text format of microcode programs (import, data and code segments)."""
from __future__ import annotations

import re

from ..sema.types import BOOL, INT, REL_OPS, BOOL_OPS, SHIFT_OPS, T, parse_suffix, signed_bits_needed
from .instr import END, Decl, Instr, MProgram, Operand, expr_result_type

INT64 = T(INT, 64)
ARITY = {"move": (2,), "expr": (3, 4), "bind": (1,), "jump": (1,), "falsejump": (2,),
         "label": (1,), "special": (1,), "nop": (0,)}
UNARY_OPS = ("-", "not", "lnot")


class MCodeSyntaxError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


# ------------------------------------------------------------------ emission

def const_default(ins: Instr, pos: int):
    """Type a constant operand gets when its text carries no type suffix."""
    if ins.op == "move":
        return ins.args[0].ty
    if ins.op == "expr":
        if len(ins.args) == 3:
            return T(BOOL) if ins.args[1] == "not" else ins.args[0].ty
        d, a, op, b = ins.args
        if op in SHIFT_OPS and pos == 3:
            return T(INT, signed_bits_needed(b.value))
        other = b if pos == 1 else a
        if not other.is_const:
            return other.eff
        if op in REL_OPS or op in BOOL_OPS or op == "@":
            return None
        return d.ty
    if ins.op == "falsejump":
        return T(BOOL)
    if ins.op == "fun":
        return INT64
    return None


def operand_text(op: Operand, default=None):
    if op.kind == "const":
        s = str(op.value)
        if op.ty is not None and op.ty != default:
            s += f":{op.ty.suffix}"
        return s
    if op.kind == "obj":
        s = op.name
    else:
        s = f"${op.kind}.[{op.value}]"
    if op.index is not None:
        s += f".[{operand_text(op.index)}]"
    if op.conv is not None:
        s += f":{op.conv.suffix}"
    return s


def instr_text(ins: Instr):
    if ins.op == "label":
        return f"{ins.args[0]}:"
    if ins.op == "nop":
        return "nop"
    if ins.op in ("bind", "jump", "special"):
        return f"{ins.op} ({ins.args[0]})"
    parts = []
    for pos, a in enumerate(ins.args):
        if isinstance(a, Operand):
            parts.append(operand_text(a, const_default(ins, pos) if a.is_const else None))
        else:
            parts.append(str(a))
    return f"{ins.op} ({','.join(parts)})"


def decl_text(d: Decl):
    if d.kind == "array":
        return f"array {d.name}: {d.detail} {d.ty.suffix}[{d.size}]"
    if d.kind == "object":
        return f"object {d.name}: {d.detail}"
    if d.kind == "process":
        return f"process {d.name}"
    return f"{d.kind} {d.name}: {d.ty.suffix}"


def emit_text(program: MProgram) -> str:
    lines = [f"process {program.name}:", "", "import:", "begin"]
    lines += [f"  {decl_text(d)}" for d in program.imports]
    lines += ["end", "", "data:", "begin"]
    lines += [f"  {decl_text(d)}" for d in program.data]
    lines += ["end", "", "code:", "begin"]
    for ins in program.code:
        lines.append(("  " if ins.op == "label" else "    ") + instr_text(ins))
    lines.append("end")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- parsing

_DECL = re.compile(r"^(register|signal|variable|queue|channel)\s+(\S+)\s*:\s*([ILBC]\d+)$")
_ARRAY = re.compile(r"^array\s+(\S+)\s*:\s*(register|variable|signal)\s+([ILBC]\d+)\[(\d+)\]$")
_OBJECT = re.compile(r"^object\s+(\S+)\s*:\s*(\w+)$")
_PROCESS = re.compile(r"^process\s+(\S+)$")
_INSTR = re.compile(r"^(\w+)\s*(?:\((.*)\))?$")
_SUFFIX = re.compile(r"^(.*):([ILBC]\d+)$")


def parse_decl(text, line):
    m = _DECL.match(text)
    if m:
        return Decl(m.group(1), m.group(2), parse_suffix(m.group(3)))
    m = _ARRAY.match(text)
    if m:
        return Decl("array", m.group(1), parse_suffix(m.group(3)), int(m.group(4)), m.group(2))
    m = _OBJECT.match(text)
    if m:
        return Decl("object", m.group(1), detail=m.group(2))
    m = _PROCESS.match(text)
    if m:
        return Decl("process", m.group(1))
    raise MCodeSyntaxError(f"bad declaration '{text}'", line)


def _split_args(text):
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip() or out:
        out.append(cur.strip())
    return out


class _Parser:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.i = 0
        self.decls = {}
        self.scratch = {}

    def significant(self):
        while self.i < len(self.lines):
            s = self.lines[self.i].split("--", 1)[0].strip()
            self.i += 1
            if s:
                return s, self.i
        return None, self.i

    def expect(self, word):
        s, ln = self.significant()
        if s != word:
            raise MCodeSyntaxError(f"expected '{word}', found '{s}'", ln)

    def segment(self, name, body):
        self.expect(f"{name}:")
        self.expect("begin")
        while True:
            s, ln = self.significant()
            if s is None:
                raise MCodeSyntaxError(f"unterminated {name} segment", ln)
            if s == "end":
                return
            body(s, ln)

    def run(self):
        s, ln = self.significant()
        m = re.match(r"^process\s+(\S+):$", s or "")
        if not m:
            raise MCodeSyntaxError("expected 'process <name>:' header", ln)
        prog = MProgram(m.group(1))

        def decl(into):
            def f(s, ln):
                d = parse_decl(s, ln)
                if d.name in self.decls:
                    raise MCodeSyntaxError(f"'{d.name}' declared twice", ln)
                self.decls[d.name] = d
                into.append(d)
            return f

        self.segment("import", decl(prog.imports))
        self.segment("data", decl(prog.data))
        self.segment("code", lambda s, ln: prog.code.append(self.instr(s, ln)))
        s, ln = self.significant()
        if s is not None:
            raise MCodeSyntaxError(f"text after code segment: '{s}'", ln)
        _check_labels(prog.code)
        return prog

    def instr(self, s, ln):
        if s.endswith(":") and re.match(r"^[\w%]+:$", s):
            return Instr("label", (s[:-1],))
        m = _INSTR.match(s)
        if not m:
            raise MCodeSyntaxError(f"cannot read instruction '{s}'", ln)
        op, argtext = m.group(1), m.group(2)
        args = _split_args(argtext) if argtext is not None else []
        if op == "fun":
            if len(args) < 2:
                raise MCodeSyntaxError("fun needs an object and a method", ln)
        elif op not in ARITY:
            raise MCodeSyntaxError(f"unknown opcode '{op}'", ln)
        elif len(args) not in ARITY[op]:
            raise MCodeSyntaxError(f"'{op}' takes {' or '.join(map(str, ARITY[op]))} "
                                   f"operands, got {len(args)}", ln)
        if op == "nop":
            return Instr("nop")
        if op == "bind":
            return Instr("bind", (int(args[0]),))
        if op in ("jump", "label", "special"):
            return Instr(op, (args[0],))
        if op == "fun":
            head = Operand("obj", args[0])
            ops = [self.operand(a, ln) for a in args[2:]]
            ins = Instr("fun", (head, args[1]) + tuple(ops))
            return self.type_consts(ins, ln)
        if op == "falsejump":
            ins = Instr("falsejump", (self.operand(args[0], ln), args[1]))
            return self.type_consts(ins, ln)
        if op == "move":
            d, src = self.operand(args[0], ln), self.operand(args[1], ln)
            ins = self.type_consts(Instr("move", (d, src)), ln, dst_ty=lambda i: i.args[1].eff)
            return ins
        if len(args) == 3:
            d, uop, a = args
            ins = Instr("expr", (self.operand(d, ln), uop, self.operand(a, ln)))
            return self.type_consts(ins, ln, dst_ty=lambda i: expr_result_type(i.args[1], i.args[2]))
        d, a, bop, b = args
        ins = Instr("expr", (self.operand(d, ln), self.operand(a, ln), bop, self.operand(b, ln)))
        return self.type_consts(ins, ln, dst_ty=lambda i: expr_result_type(i.args[2], i.args[1],
                                                                            i.args[3]))

    def operand(self, text, ln):
        if not text:
            raise MCodeSyntaxError("empty operand", ln)
        ty = None
        m = _SUFFIX.match(text)
        if m and not text.endswith("]"):
            text, ty = m.group(1), parse_suffix(m.group(2))
        if re.fullmatch(r"-?\d+", text):
            return Operand("const", value=int(text), ty=ty)
        index = None
        m = re.fullmatch(r"(.*?)\.\[(.*)\]", text)
        sm = re.fullmatch(r"\$(immed|temp|alu)\.\[(\d+)\]", text)
        if sm:
            kind, k = sm.group(1), int(sm.group(2))
            key = f"${kind}.[{k}]"
            return Operand(kind, value=k, ty=self.scratch.get(key), conv=ty)
        if m:
            text, index = m.group(1), self.operand(m.group(2), ln)
        d = self.decls.get(text)
        if d is None:
            # processes and abstract objects named by fun need no data type
            raise MCodeSyntaxError(f"undeclared object '{text}'", ln)
        return Operand("obj", text, index=index, ty=d.ty, conv=ty)

    def type_consts(self, ins, ln, dst_ty=None):
        # destination scratch registers take the type of the value written to them
        if dst_ty is not None:
            d = ins.args[0]
            if d.kind in ("immed", "temp", "alu"):
                probe = Instr(ins.op, tuple(self._untyped_consts(ins)))
                ty = dst_ty(self._fill(probe))
                d = Operand(d.kind, value=d.value, ty=ty)
                ins = Instr(ins.op, (d,) + ins.args[1:])
        ins = self._fill(ins)
        for a in ins.operands():
            if a.kind in ("immed", "temp", "alu") and a.ty is None:
                raise MCodeSyntaxError(f"{operand_text(a)} is read before it is written", ln)
        d = ins.dst()
        if d is not None and d.kind in ("immed", "temp", "alu"):
            self.scratch[f"${d.kind}.[{d.value}]"] = d.ty
        return ins

    @staticmethod
    def _untyped_consts(ins):
        return list(ins.args)

    def _fill(self, ins):
        args = list(ins.args)
        for pos, a in enumerate(args):
            if isinstance(a, Operand) and a.is_const and a.ty is None:
                args[pos] = Operand("const", value=a.value, ty=None)
        filled = Instr(ins.op, tuple(args))
        for pos, a in enumerate(args):
            if isinstance(a, Operand) and a.is_const and a.ty is None:
                args[pos] = Operand("const", value=a.value, ty=const_default(filled, pos))
        return Instr(ins.op, tuple(args))


def _check_labels(code):
    seen = set()
    for ins in code:
        if ins.op == "label":
            if ins.args[0] in seen:
                raise MCodeSyntaxError(f"duplicate label '{ins.args[0]}'")
            seen.add(ins.args[0])
    for k, ins in enumerate(code):
        t = ins.target
        if t is not None and t != END and t not in seen:
            raise MCodeSyntaxError(f"jump to undefined label '{t}'")
        if ins.op == "bind":
            n = ins.args[0]
            body = code[k + 1:k + 1 + n]
            if len(body) != n or any(x.op in ("bind", "label") for x in body):
                raise MCodeSyntaxError(f"bind ({n}) must be followed by {n} plain instructions")


def parse_text(text: str) -> MProgram:
    return _Parser(text).run()
