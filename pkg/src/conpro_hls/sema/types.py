"""Data types and bit-exact value semantics (two's complement at declared width)."""
from __future__ import annotations

from dataclasses import dataclass

INT, LOGIC, BOOL, CHAR = "INT", "LOGIC", "BOOL", "CHAR"
LETTER = {INT: "I", LOGIC: "L", BOOL: "B", CHAR: "C"}
FROM_LETTER = {v: k for k, v in LETTER.items()}
MAX_WIDTH = 64

ARITH_OPS = ("+", "-", "*", "/", "%")
BIT_OPS = ("land", "lor", "lxor")
SHIFT_OPS = ("lsl", "lsr")
REL_OPS = ("<", "<=", ">", ">=", "=", "<>")
BOOL_OPS = ("and", "or", "xor")


@dataclass(frozen=True)
class DataType:
    base: str
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise ValueError(f"width {self.width} outside 1..{MAX_WIDTH}")

    @property
    def suffix(self):
        return f"{LETTER[self.base]}{self.width}"

    @property
    def signed(self):
        return self.base == INT

    def __str__(self):
        if self.base == INT:
            return f"int[{self.width}]"
        if self.base == LOGIC:
            return "logic" if self.width == 1 else f"logic[{self.width}]"
        return self.base.lower()

    def wrap(self, v: int) -> int:
        return wrap(v, self)

    def fits(self, v: int) -> bool:
        if self.base == INT:
            return -(1 << (self.width - 1)) <= v < (1 << (self.width - 1))
        if self.base == BOOL:
            return v in (0, 1)
        return 0 <= v < (1 << self.width)

    def zero(self):
        return 0


def T(base, width=None):
    if base == BOOL:
        return DataType(BOOL, 1)
    if base == CHAR:
        return DataType(CHAR, 8)
    return DataType(base, width)


def parse_suffix(text: str) -> DataType:
    return T(FROM_LETTER[text[0]], int(text[1:]))


def wrap(v: int, ty: DataType) -> int:
    w = ty.width
    if ty.base == BOOL:
        return 1 if v else 0
    v &= (1 << w) - 1
    if ty.base == INT and v >= 1 << (w - 1):
        v -= 1 << w
    return v


def bits(v: int, ty: DataType) -> int:
    """Unsigned bit pattern of a value."""
    return v & ((1 << ty.width) - 1)


def signed_bits_needed(v: int) -> int:
    """Smallest INT width holding v."""
    if v >= 0:
        return v.bit_length() + 1
    return (-v - 1).bit_length() + 1


def _tdiv(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def binop(op: str, a: int, b: int, ty: DataType, rty: DataType | None = None) -> int:
    """Evaluate a binary operator on operands of type ty.

    Division and remainder by zero yield 0. Relational and boolean operators
    return 0/1. Concatenation needs the right operand type rty.
    """
    if op == "+":
        return wrap(a + b, ty)
    if op == "-":
        return wrap(a - b, ty)
    if op == "*":
        return wrap(a * b, ty)
    if op == "/":
        return 0 if b == 0 else wrap(_tdiv(a, b), ty)
    if op == "%":
        return 0 if b == 0 else wrap(a - b * _tdiv(a, b), ty)
    if op == "land":
        return wrap(bits(a, ty) & bits(b, ty), ty)
    if op == "lor":
        return wrap(bits(a, ty) | bits(b, ty), ty)
    if op == "lxor":
        return wrap(bits(a, ty) ^ bits(b, ty), ty)
    if op == "lsl":
        return 0 if b >= ty.width or b < 0 else wrap(bits(a, ty) << b, ty)
    if op == "lsr":
        return 0 if b >= ty.width or b < 0 else wrap(bits(a, ty) >> b, ty)
    if op == "@":
        return (bits(a, ty) << rty.width) | bits(b, rty)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "=":
        return int(a == b)
    if op == "<>":
        return int(a != b)
    if op == "and":
        return int(bool(a) and bool(b))
    if op == "or":
        return int(bool(a) or bool(b))
    if op == "xor":
        return int(bool(a) != bool(b))
    raise ValueError(f"unknown operator {op}")


def unop(op: str, a: int, ty: DataType) -> int:
    if op == "-":
        return wrap(-a, ty)
    if op == "not":
        return int(not a)
    if op == "lnot":
        return wrap(~bits(a, ty), ty)
    raise ValueError(f"unknown unary operator {op}")


def convert(v: int, src: DataType, dst: DataType) -> int:
    """Bit-pattern conversion between types (to_int, to_logic, auto resize)."""
    if dst.base == BOOL:
        return int(v != 0)
    if src.base == INT and dst.base == INT:
        return wrap(v, dst)
    return wrap(bits(v, src), dst)


def result_type(op: str, ty: DataType, rty: DataType | None = None) -> DataType:
    if op in REL_OPS or op in BOOL_OPS:
        return T(BOOL)
    if op == "@":
        return T(LOGIC, ty.width + rty.width)
    return ty
