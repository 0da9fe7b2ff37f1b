"""Symbols, per-process information and the typed module produced by analysis."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import NOWHERE, Loc

STORAGE = ("reg", "var", "sig")
ABSTRACT = ("mutex", "semaphore", "event", "barrier", "timer", "random", "system")
GUARDED_ABSTRACT = ("mutex", "semaphore", "event", "barrier", "timer", "random")

METHODS = {
    "mutex": {"lock": 0, "unlock": 0, "init": 0},
    "semaphore": {"down": 0, "up": 0, "init": 1, "unlock": 0},
    "event": {"await": 0, "wakeup": 0, "init": 0},
    "barrier": {"await": 0, "init": 0},
    "timer": {"await": 0, "time": 1, "start": 0, "stop": 0, "init": 0},
    "random": {"read": 1, "seed": 1, "init": 0},
    "queue": {"read": 1, "write": 1, "unlock": 0},
    "channel": {"read": 1, "write": 1, "unlock": 0},
    "process": {"start": 0, "stop": 0, "call": 0},
}


@dataclass
class Symbol:
    name: str
    kind: str  # reg var sig const queue channel <abstract> process function ram-block array object-array process-array exception component
    type: object = None  # DataType for storage, queues and typed constants
    scope: str = "global"
    owner: str | None = None  # process owning a local, or function owning FUN_ registers
    params: dict = field(default_factory=dict)
    block: str | None = None
    offset: int | None = None
    exported: bool = False
    size: int = 1  # storage arrays: flattened element count
    dims: tuple = ()
    elem_kind: str | None = None  # storage arrays: reg var sig
    elements: list = field(default_factory=list)  # object and process arrays
    value: int | None = None  # constants and enum members
    role: str | None = None  # arg ret exc loop call-temp
    loc: Loc = NOWHERE

    @property
    def shared(self):
        return self.scope == "global"

    @property
    def is_array(self):
        return self.kind == "array"

    @property
    def in_ram(self):
        return self.kind == "var" or (self.kind == "array" and self.elem_kind == "var")


@dataclass
class ProcessInfo:
    name: str
    body: list
    locals: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    kind: str = "process"  # process | function
    func: str | None = None  # source function name for FUN_ processes
    args: list = field(default_factory=list)  # global registers holding parameters
    rets: list = field(default_factory=list)
    template: str | None = None  # process array this element was replicated from
    index: int | None = None
    exc_reg: str | None = None
    escapes: set = field(default_factory=set)
    loc: Loc = NOWHERE


@dataclass
class TypedModule:
    name: str
    symbols: dict  # global name -> Symbol, declaration order
    processes: list  # ProcessInfo, declaration order, arrays expanded in place
    exceptions: dict = field(default_factory=dict)  # name -> id (1..K)
    clock_hz: int = 1_000_000
    config: list = field(default_factory=list)  # top-level MethodCall nodes
    accesses: dict = field(default_factory=dict)  # object -> {process: set(ops)}
    notes: list = field(default_factory=list)  # Diagnostic
    inline_functions: dict = field(default_factory=dict)

    def process(self, name) -> ProcessInfo:
        for p in self.processes:
            if p.name == name:
                return p
        raise KeyError(name)

    def lookup(self, name, proc=None) -> Symbol | None:
        if proc is not None:
            p = proc if isinstance(proc, ProcessInfo) else self.process(proc)
            if name in p.locals:
                return p.locals[name]
        return self.symbols.get(name)

    @property
    def process_names(self):
        return [p.name for p in self.processes]

    def accessors(self, obj):
        """Processes touching obj, in declaration order."""
        users = self.accesses.get(obj, {})
        return [p for p in self.process_names if p in users]

    def ops(self, obj):
        out = set()
        for ops in self.accesses.get(obj, {}).values():
            out |= ops
        return out
