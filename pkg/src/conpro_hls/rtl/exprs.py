"""Translation of microcode operands and operators into VHDL expression text."""
from __future__ import annotations

from dataclasses import dataclass

from ..sema.types import BOOL, INT, LOGIC, T, DataType


@dataclass
class V:
    text: str
    ty: DataType
    cond: bool = False  # VHDL boolean instead of std_logic


def paren(t: str) -> str:
    return f"({t})" if " " in t and not _wrapped(t) else t


def _wrapped(t):
    if not t.startswith("("):
        return False
    depth = 0
    for i, ch in enumerate(t):
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0 and i < len(t) - 1:
            return False
    return True


def as_logic(v: V) -> V:
    return V(f"B_to_L({v.text})", v.ty) if v.cond else v


def as_cond(v: V) -> str:
    if v.cond:
        return v.text
    return f"{paren(v.text)} = '1'"


def bits_of(v: V) -> str:
    """The value's bit pattern as a std_logic_vector of its own width."""
    if v.ty.base == INT:
        return f"I_to_L({v.text})"
    if v.ty.base == BOOL:
        return f"B_to_V({as_logic(v).text})"
    return v.text


def convert(v: V, dst: DataType) -> V:
    src = v.ty
    if src == dst:
        return v
    if dst.base == BOOL:
        return V(f"V_to_B({bits_of(v)})", dst)
    if src.base == INT and dst.base == INT:
        return V(f"resize({v.text},{dst.width})", dst)
    b = bits_of(v)
    if src.width != dst.width:
        b = f"L_resize({b},{dst.width})"
    if dst.base == INT:
        return V(f"L_to_I({b})", dst)
    return V(b, dst)


def as_int(v: V) -> str:
    """Integer-valued VHDL text of a value (indices, shift amounts, method arguments)."""
    if v.ty.base == INT:
        return f"to_integer({v.text})"
    return f"to_integer(unsigned({bits_of(v)}))"


def _slv_arith(a, b, op, w):
    ua, ub = f"unsigned({a.text})", f"unsigned({b.text})"
    if op == "*":
        return f"std_logic_vector(resize({ua} * {ub},{w}))"
    return f"std_logic_vector({ua} {op} {ub})"


def binary(op: str, a: V, b: V) -> V:
    ty = a.ty
    if op in ("and", "or", "xor"):
        return V(f"{paren(as_cond(a))} {op} {paren(as_cond(b))}", T(BOOL), True)
    if op in ("<", "<=", ">", ">=", "=", "<>"):
        vop = "/=" if op == "<>" else op
        if ty.base == BOOL:
            return V(f"{as_logic(a).text} {vop} {as_logic(b).text}", T(BOOL), True)
        if ty.base == INT or op in ("=", "<>"):
            return V(f"{paren(a.text)} {vop} {paren(b.text)}", T(BOOL), True)
        return V(f"unsigned({a.text}) {vop} unsigned({b.text})", T(BOOL), True)
    if op == "@":
        return V(f"{paren(bits_of(a))} & {paren(bits_of(b))}", T(LOGIC, a.ty.width + b.ty.width))
    if op in ("lsl", "lsr"):
        fn = "C_shl" if op == "lsl" else "C_shr"
        return V(f"{fn}({a.text},{as_int(b)})", ty)
    if ty.base == BOOL:
        a, b = as_logic(a), as_logic(b)
    if op in ("land", "lor", "lxor"):
        return V(f"{paren(a.text)} {op[1:]} {paren(b.text)}", ty)
    if op in ("/", "%"):
        fn = "C_div" if op == "/" else "C_rem"
        return V(f"{fn}({a.text},{b.text})", ty)
    if ty.base == INT:
        if op == "*":
            return V(f"resize({paren(a.text)} * {paren(b.text)},{ty.width})", ty)
        return V(f"{paren(a.text)} {op} {paren(b.text)}", ty)
    return V(_slv_arith(a, b, op, ty.width), ty)


def unary(op: str, a: V) -> V:
    if op == "not":
        return V(f"not {paren(as_cond(a))}", T(BOOL), True)
    if op == "lnot":
        return V(f"not {paren(as_logic(a).text)}", a.ty)
    if a.ty.base == INT:
        return V(f"-{paren(a.text)}", a.ty)
    return V(f"std_logic_vector(0 - unsigned({a.text}))", a.ty)

