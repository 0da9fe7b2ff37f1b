"""Linear microcode: operands, instructions and per-process programs."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..sema.types import BOOL, BOOL_OPS, LOGIC, REL_OPS, T, DataType

END = "%END"
DATA_OPS = ("move", "expr")
CONTROL_OPS = ("jump", "falsejump", "fun", "label", "special")


@dataclass(frozen=True)
class Operand:
    kind: str  # obj immed temp alu const
    name: str | None = None
    value: int | None = None
    index: "Operand | None" = None  # array element selector
    ty: DataType | None = None
    conv: DataType | None = None  # read converted to this type

    @property
    def eff(self):
        return self.conv or self.ty

    @property
    def is_const(self):
        return self.kind == "const"

    @property
    def key(self):
        """Storage name this operand touches (temporaries included), or None for constants."""
        if self.kind == "obj":
            return self.name
        if self.kind in ("immed", "temp", "alu"):
            return f"${self.kind}.[{self.value}]"
        return None


def obj(name, ty, conv=None, index=None):
    return Operand("obj", name, ty=ty, conv=conv, index=index)


def const(value, ty=None):
    return Operand("const", value=value, ty=ty)


def immed(k, ty):
    return Operand("immed", value=k, ty=ty)


def temp(k, ty):
    return Operand("temp", value=k, ty=ty)


@dataclass
class Instr:
    op: str  # move expr bind jump falsejump fun label special nop
    args: tuple = ()

    # move: (dst, src)  expr: (dst, a, operator, b) or (dst, operator, a)
    # bind: (n,)  jump: (label,)  falsejump: (cond, label)
    # fun: (object, method, *operands)  label: (name,)  special: (tag,)

    @property
    def is_data(self):
        return self.op in DATA_OPS

    @property
    def target(self):
        if self.op == "jump":
            return self.args[0]
        if self.op == "falsejump":
            return self.args[1]
        return None

    def operands(self):
        if self.op == "move":
            return [self.args[0], self.args[1]]
        if self.op == "expr":
            return [a for a in self.args if isinstance(a, Operand)]
        if self.op == "falsejump":
            return [self.args[0]]
        if self.op == "fun":
            return list(self.args[2:])
        return []

    def dst(self):
        return self.args[0] if self.op in ("move", "expr") else None

    def sources(self):
        if self.op == "move":
            return [self.args[1]]
        if self.op == "expr":
            return [a for a in self.args[1:] if isinstance(a, Operand)]
        if self.op == "falsejump":
            return [self.args[0]]
        return []

    def reads(self):
        """Storage keys read, including array selectors and the array of an indexed target."""
        out = []
        for s in self.sources():
            _read_keys(s, out)
        d = self.dst()
        if d is not None and d.index is not None:
            _read_keys(d.index, out)
        return out

    def writes(self):
        d = self.dst()
        return [d.key] if d is not None and d.key else []


def _read_keys(op, out):
    if op.key:
        out.append(op.key)
    if op.index is not None:
        _read_keys(op.index, out)


def expr_result_type(operator, a, b=None):
    if operator in REL_OPS or operator in BOOL_OPS or operator == "not":
        return T(BOOL)
    if operator == "@":
        return T(LOGIC, a.eff.width + b.eff.width)
    return a.eff


@dataclass
class Decl:
    kind: str  # register signal variable array object queue channel process
    name: str
    ty: DataType | None = None
    size: int | None = None  # arrays
    detail: str | None = None  # object type, array element kind


@dataclass
class MProgram:
    name: str
    imports: list = field(default_factory=list)
    data: list = field(default_factory=list)
    code: list = field(default_factory=list)

    def decl(self, name):
        for d in self.data + self.imports:
            if d.name == name:
                return d
        return None

    def labels(self):
        return [i.args[0] for i in self.code if i.op == "label"]


def groups(code):
    """Split code into execution steps.

    Returns a list of (labels, instrs): labels naming the step, instrs the step's
    instructions (a bind group counts as one step). Trailing labels form a final entry
    with no instructions, which stands for the process end.
    """
    out = []
    labels = []
    i = 0
    while i < len(code):
        ins = code[i]
        if ins.op == "label":
            labels.append(ins.args[0])
            i += 1
            continue
        if ins.op == "bind":
            n = ins.args[0]
            body = code[i + 1:i + 1 + n]
            out.append((labels, [ins] + body))
            i += 1 + n
        else:
            out.append((labels, [ins]))
            i += 1
        labels = []
    if labels:
        out.append((labels, []))
    return out


def step_body(instrs):
    """Instructions of a step without its bind header."""
    return instrs[1:] if instrs and instrs[0].op == "bind" else instrs


def step_count(code):
    return sum(1 for _, ins in groups(code) if ins)


def check_program(p: MProgram):
    """Structural checks: labels unique, jump targets exist, bind groups well formed."""
    seen = set()
    for ins in p.code:
        if ins.op == "label":
            if ins.args[0] in seen:
                raise ValueError(f"duplicate label {ins.args[0]}")
            seen.add(ins.args[0])
    for k, ins in enumerate(p.code):
        t = ins.target
        if t is not None and t != END and t not in seen:
            raise ValueError(f"jump to undefined label {t}")
        if ins.op == "bind":
            n = ins.args[0]
            body = p.code[k + 1:k + 1 + n]
            if len(body) != n or any(x.op in ("bind", "label") for x in body):
                raise ValueError(f"malformed bind({n}) at instruction {k}")
