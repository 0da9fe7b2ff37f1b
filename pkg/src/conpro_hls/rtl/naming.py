"""VHDL names, types and the port view of one process entity."""
from __future__ import annotations

from dataclasses import dataclass

from ..sema.types import BOOL, INT, T, DataType, bits

OBJ_PREFIX = {
    "semaphore": "SEMA", "mutex": "MUTEX", "event": "EVENT", "barrier": "BARRIER",
    "timer": "TIMER", "random": "RANDOM", "queue": "QUEUE", "channel": "CHAN",
}
ROLE_PREFIX = {"arg": "REG_ARG_", "ret": "REG_RET_"}
CLK, RESET = "conpro_system_clk", "conpro_system_reset"


class RtlError(Exception):
    """Emission failure: an unresolved label or a name collision after mangling."""


def vtype(ty: DataType) -> str:
    if ty.base == INT:
        return f"signed({ty.width - 1} downto 0)"
    if ty.base == BOOL:
        return "std_logic"
    return f"std_logic_vector({ty.width - 1} downto 0)"


def bit_string(v, width):
    return '"' + format(v & ((1 << width) - 1), f"0{width}b") + '"'


def zero(vt: str) -> str:
    """Reset/default value for a VHDL type text."""
    if vt == "std_logic":
        return "'0'"
    if vt in ("integer", "natural") or vt.startswith("integer"):
        return "0"
    w = int(vt.split("(")[1].split()[0]) + 1
    if vt.startswith("signed"):
        return f"to_signed(0,{w})"
    return bit_string(0, w)


def slv(width):
    return f"std_logic_vector({width - 1} downto 0)"


def sel_width(size):
    """Array selector width: enough bits for size-1, rounded up to whole bytes."""
    need = max(1, (size - 1).bit_length())
    return 8 * ((need + 7) // 8)


def const_name(value, ty: DataType):
    v = f"m{-value}" if value < 0 else str(value)
    return f"CONST_{ty.suffix}_{v}"


def const_decl(value, ty: DataType):
    if ty.base == INT:
        init = f"to_signed({value},{ty.width})"
    else:
        init = bit_string(bits(value, ty), ty.width)
    return f"constant {const_name(value, ty)}: {vtype(ty)} := {init};"


@dataclass
class Port:
    name: str
    direction: str  # in | out
    vt: str
    key: str | None = None  # object key ("SEMA_sem"); None for process-own ports
    suffix: str = ""  # "DOWN", "GD", ...

    def top_signal(self, proc):
        """Name of the top-level signal this port connects to."""
        if self.key is None:
            return self.name
        return f"{self.key}_{proc}_{self.suffix}"


class EntityView:
    """Names and ports of one process entity, collected while its states are built."""

    def __init__(self, program, tm=None, module=None):
        self.program = program
        self.tm = tm
        self.module = module or (tm.name if tm is not None else "mod")
        self.name = program.name
        self.local = {d.name: d for d in program.data}
        self.imported = {d.name: d for d in program.imports}
        self.ports: dict[str, Port] = {}
        self.consts: dict[str, str] = {}
        self.temps: dict[str, str] = {}  # temp/alu signal -> VHDL type
        self.ram = {}
        if tm is not None:
            from ..pipeline import ram_map
            self.ram = ram_map(tm)

    def symbol(self, name):
        if self.tm is None:
            return None
        return self.tm.lookup(name, self.name if self.name in self.tm.process_names else None)

    def role(self, name):
        s = self.symbol(name)
        return s.role if s is not None else None

    def in_ram(self, name):
        d = self.local.get(name) or self.imported.get(name)
        if d is None:
            return False
        return d.kind == "variable" or (d.kind == "array" and d.detail == "variable")

    def ram_block(self, name):
        return self.ram.get(name, name)

    def ram_width(self, name):
        if self.tm is not None:
            return ram_word(self.tm, self.ram_block(name))
        d = self.local.get(name) or self.imported.get(name)
        return d.ty.width

    def ram_offset(self, name):
        s = self.symbol(name)
        return s.offset or 0 if s is not None else 0

    def random_width(self, name, fallback):
        s = self.symbol(name)
        if s is not None:
            return s.params.get("datawidth", 8)
        return fallback.width

    def reg_key(self, name):
        return ROLE_PREFIX.get(self.role(name), "REG_") + name

    def obj_key(self, name):
        d = self.imported.get(name)
        if d is not None and d.kind == "process":
            return f"PRO_{name}"
        if d is not None and d.kind in ("queue", "channel"):
            return f"{OBJ_PREFIX[d.kind]}_{name}"
        detail = d.detail if d is not None else None
        return f"{OBJ_PREFIX.get(detail, 'OBJ')}_{name}"

    def port(self, key, suffix, direction, vt):
        name = f"{key}_{suffix}"
        old = self.ports.get(name)
        if old is not None:
            if old.direction != direction or old.vt != vt:
                raise RtlError(f"{self.name}: port {name} used with two different types")
            return name
        self.ports[name] = Port(name, direction, vt, key, suffix)
        return name

    def const(self, value, ty: DataType):
        if ty.base == BOOL:
            return "'1'" if value else "'0'"
        n = const_name(value, ty)
        self.consts.setdefault(n, const_decl(value, ty))
        return n

    def temp(self, kind, k, ty):
        n = f"{kind.upper()}_{k}"
        old = self.temps.get(n)
        if old is not None and old != vtype(ty):
            raise RtlError(f"{self.name}: {n} used with two different types")
        self.temps[n] = vtype(ty)
        return n

    def own_ports(self):
        """ENABLE/END and the system clock/reset, appended after the object ports."""
        p = self.name
        return [Port(f"PRO_{p}_ENABLE", "in", "std_logic"), Port(f"PRO_{p}_END", "out", "std_logic"),
                Port(CLK, "in", "std_logic"), Port(RESET, "in", "std_logic")]

    def all_ports(self):
        return list(self.ports.values()) + self.own_ports()


def int_type(width):
    return T(INT, width)


def ram_word(tm, block):
    """Word width of a RAM block: the widest variable placed in it."""
    w = 1
    syms = list(tm.symbols.values())
    for p in tm.processes:
        syms.extend(p.locals.values())
    for s in syms:
        if s.in_ram and s.block == block and s.type is not None:
            w = max(w, s.type.width)
    return w

